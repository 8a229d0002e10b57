use std::path::Path;

use rayon::prelude::*;

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::MultiExitModel;
use crate::scalar::Scalar;
use crate::trace::{save_traces, PredictionTrace};

/// One trace per sample of `split`, in split order. Each sample is run on
/// its own (batch size 1); samples are independent and may be processed in
/// parallel without affecting the output.
pub fn export_traces<T: Scalar>(
    model: &MultiExitModel<T>,
    data: &Dataset,
    split: Split,
) -> Result<Vec<PredictionTrace<T>>> {
    if data.num_classes != model.config().num_classes {
        return Err(Error::config(format!(
            "dataset has {} classes, model has {}",
            data.num_classes,
            model.config().num_classes
        )));
    }
    data.encoded(split, model.config().max_seq_len)
        .par_iter()
        .map(|(index, tokens, label)| model.forward_all_exits(format!("{split}-{index}"), tokens, *label))
        .collect()
}

/// [`export_traces`] written as JSON Lines.
pub fn write_trace_file<T: Scalar + serde::Serialize>(
    model: &MultiExitModel<T>,
    data: &Dataset,
    split: Split,
    path: &Path,
) -> Result<usize> {
    let traces = export_traces(model, data, split)?;
    save_traces(path, &traces)?;
    Ok(traces.len())
}
