use anyhow::{Context as _, Result};
use fseg_core::tensor_io::read_fst_header;
use serde_json::json;

use crate::files::{ensure_dir, write_json};
use crate::manifest::Failure;
use crate::{Context, InfoArgs, Record};

pub fn run(_ctx: &Context, args: &InfoArgs) -> Result<Record> {
    let mut headers = Vec::new();
    let mut failures = Vec::new();
    for path in &args.files {
        match read_fst_header(path) {
            Ok(h) => {
                let dims: Vec<String> = h.dims.iter().map(u32::to_string).collect();
                let mut line = format!(
                    "{} version={} dtype={} ndim={} dims={}",
                    path.display(),
                    h.version,
                    h.dtype_name(),
                    h.dims.len(),
                    dims.join("x")
                );
                if let Some(n) = h.n_labels {
                    line.push_str(&format!(" n_labels={n}"));
                }
                println!("{line}");
                headers.push(json!({
                    "path": path,
                    "version": h.version,
                    "dtype": h.dtype_name(),
                    "dims": h.dims,
                    "n_labels": h.n_labels,
                }));
            }
            Err(e) => failures.push(Failure::new(path.display().to_string(), e)),
        }
    }
    let mut record =
        Record { params: serde_json::to_value(args)?, inputs: args.files.clone(), failures, ..Record::default() };
    if let Some(out) = &args.out {
        ensure_dir(out)?;
        let path = out.join("headers.json");
        write_json(&path, &headers).context("writing headers")?;
        record.outputs.push(path);
        record.manifest_path = Some(out.join("manifest.json"));
    }
    Ok(record)
}
