/// Advances the consecutive-agreement counter by one layer.
///
/// `prev_argmax` is `None` at the first layer, where the counter starts at 1.
/// Afterwards the counter grows by one while the prediction repeats and
/// resets to 1 when it changes.
pub fn patience_update(prev_counter: usize, prev_argmax: Option<usize>, cur_argmax: usize) -> usize {
    match prev_argmax {
        Some(prev) if prev == cur_argmax => prev_counter + 1,
        _ => 1,
    }
}
