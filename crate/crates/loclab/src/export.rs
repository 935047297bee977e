//! Deterministic tabular and structured exports. CSV files open with the
//! `#`-prefixed manifest header followed by a column header row; floats
//! print with Rust's shortest-roundtrip formatting, so identical runs
//! produce identical bytes.

use loclab_core::bernoulli::BernoulliDecomposition;
use loclab_core::ensembles::PotentialField;
use loclab_core::geometry::{SiteSet, Square, TiltedRect};
use loclab_core::tilted::TiltedField;
use serde_json::{json, Value};
use std::path::Path;

use crate::manifest::ManifestBuilder;
use crate::CliError;

pub struct CsvWriter {
    lines: Vec<String>,
}

impl CsvWriter {
    pub fn new(header_comment: &str, columns: &str) -> Self {
        CsvWriter { lines: vec![header_comment.to_string(), columns.to_string()] }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    pub fn write(self, path: &Path) -> Result<(), CliError> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        std::fs::write(path, text)
            .map_err(|e| CliError::Unwritable(format!("{}: {e}", path.display())))
    }
}

/// Writes a CSV data file into the run directory and records it in the
/// manifest.
pub fn write_csv(
    manifest: &mut ManifestBuilder,
    name: &str,
    columns: &str,
    rows: Vec<Vec<String>>,
) -> Result<(), CliError> {
    let mut w = CsvWriter::new(&manifest.data_header(), columns);
    for row in rows {
        w.row(&row);
    }
    w.write(&manifest.dir().join(name))?;
    manifest.record_output(name);
    Ok(())
}

/// Writes a JSON data file (with the hash embedded) into the run directory.
pub fn write_json(
    manifest: &mut ManifestBuilder,
    name: &str,
    mut value: Value,
) -> Result<(), CliError> {
    if let Value::Object(map) = &mut value {
        map.insert("config_hash".into(), Value::String(manifest.hash().to_string()));
    }
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| CliError::Invalid(format!("json encode: {e}")))?;
    std::fs::write(manifest.dir().join(name), text)
        .map_err(|e| CliError::Unwritable(format!("{name}: {e}")))?;
    manifest.record_output(name);
    Ok(())
}

pub fn square_json(sq: &Square) -> Value {
    json!({
        "kind": "square",
        "corner": [sq.corner.x, sq.corner.y],
        "side": sq.side,
        "aligned": sq.aligned,
    })
}

pub fn tilted_rect_json(r: &TiltedRect) -> Value {
    json!({
        "kind": "tilted_rect",
        "s_range": [r.s_lo, r.s_hi],
        "t_range": [r.t_lo, r.t_hi],
        "side": r.dims().0,
    })
}

/// Site sets serialize as sorted coordinate lists.
pub fn site_set_json(set: &SiteSet) -> Value {
    Value::Array(set.iter().map(|p| json!([p.x, p.y])).collect())
}

/// Families serialize as sorted hex bitmask lists.
pub fn family_json(family: &loclab_core::sperner::SubsetFamily) -> Value {
    json!({
        "n": family.ground_size(),
        "members": family.members().iter().map(|m| format!("{m:x}")).collect::<Vec<_>>(),
    })
}

pub fn decomposition_json(d: &BernoulliDecomposition) -> Value {
    let seg = |s: &loclab_core::bernoulli::StepRamp| -> Value {
        Value::Array(
            s.segments()
                .iter()
                .map(|&(t0, t1, v0, v1)| json!([t0, t1, v0, v1]))
                .collect(),
        )
    };
    json!({
        "p": d.p,
        "y_segments": seg(&d.y),
        "z_segments": seg(&d.z),
        "iota_witness": d.iota_witness,
        "gap_interval": [d.gap_interval.0, d.gap_interval.1],
    })
}

/// Potential fields export as `x,y,value` rows with a provenance header.
pub fn field_rows(field: &PotentialField) -> Vec<Vec<String>> {
    field
        .bx
        .sites()
        .map(|s| vec![s.x.to_string(), s.y.to_string(), format!("{}", field.value(s))])
        .collect()
}

/// Tilted fields export as `s,t,value` rows.
pub fn tilted_field_rows(field: &TiltedField) -> Vec<Vec<String>> {
    field
        .iter()
        .map(|((s, t), v)| vec![s.to_string(), t.to_string(), format!("{v}")])
        .collect()
}
