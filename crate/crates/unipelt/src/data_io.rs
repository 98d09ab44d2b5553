//! Dataset files: tab-separated, one example per line, UTF-8, no header.

use std::path::Path;

use unipelt_core::data::{parse_dataset, write_dataset, DataFormat, Dataset, LabelSpace};

use crate::error::{read_text, write_bytes, CliError, CliResult};

pub fn load_dataset(path: &Path, format: DataFormat, labels: &LabelSpace) -> CliResult<Dataset> {
    let text = read_text(path)?;
    parse_dataset(&text, format, labels).map_err(|e| match e {
        unipelt_core::Error::Parse { line, msg } => {
            CliError::Usage(format!("{}:{line}: {msg}", path.display()))
        }
        other => CliError::Usage(format!("{}: {other}", path.display())),
    })
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> CliResult<()> {
    write_bytes(path, write_dataset(ds)?.as_bytes())
}
