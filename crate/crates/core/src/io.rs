//! JSON serialization in the `ssdss-v1` schema.
//!
//! Every document carries `"schema": "ssdss-v1"` and a `"kind"` tag, then the
//! kind-specific fields, then an optional `"meta"` object (sorted keys) for
//! provenance. Matrices are stored as `{rows, cols, data}` with `data` in
//! row-major order; complex entries are `[re, im]` pairs. Poles are in rad/s,
//! every frequency axis and RCM frequency is in Hz.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frf::FrfSet;
use crate::types::{
    hz_to_rad, rad_to_hz, CMat, Domain, InterfaceMap, InterfacePair, ModalModel, RMat, RcmConfig, Representation,
    StateSpaceModel,
};

pub const SCHEMA: &str = "ssdss-v1";

/// Free-form provenance attached to a document.
pub type Meta = BTreeMap<String, Value>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&RMat> for RealMatrix {
    fn from(m: &RMat) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|ij| m[ij]).collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl From<&CMat> for ComplexMatrix {
    fn from(m: &CMat) -> Self {
        let data =
            (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|ij| [m[ij].re, m[ij].im]).collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl RealMatrix {
    fn to_matrix(&self, field: &str) -> Result<RMat> {
        check_len(field, self.rows, self.cols, self.data.len())?;
        Ok(RMat::from_row_slice(self.rows, self.cols, &self.data))
    }
}

impl ComplexMatrix {
    fn to_matrix(&self, field: &str) -> Result<CMat> {
        check_len(field, self.rows, self.cols, self.data.len())?;
        let data: Vec<Complex64> = self.data.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        Ok(CMat::from_row_slice(self.rows, self.cols, &data))
    }
}

fn check_len(field: &str, rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows.checked_mul(cols) != Some(len) {
        return Err(Error::Schema(format!("'{field}' declares {rows}×{cols} but holds {len} entries")));
    }
    Ok(())
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Schema(m) => Error::Schema(m),
        other => Error::Schema(format!("'{name}': {other}")),
    })
}

/// A value with an `ssdss-v1` representation.
pub trait Document: Sized {
    const KIND: &'static str;
    type Wire: Serialize + DeserializeOwned;

    fn to_wire(&self) -> Self::Wire;
    fn from_wire(w: Self::Wire) -> Result<Self>;
}

#[derive(Serialize)]
struct EnvelopeOut<'a, W> {
    schema: &'static str,
    kind: &'static str,
    #[serde(flatten)]
    body: &'a W,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    meta: &'a Meta,
}

#[derive(Deserialize)]
struct Header {
    schema: Option<String>,
    kind: Option<String>,
    #[serde(default)]
    meta: Meta,
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Document>(value: &T, meta: &Meta) -> Result<String> {
    let env = EnvelopeOut { schema: SCHEMA, kind: T::KIND, body: &value.to_wire(), meta };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

/// Parses a document of kind `T`; syntax and type errors carry the line and
/// column reported by the parser.
pub fn from_json<T: Document>(text: &str) -> Result<(T, Meta)> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let header: Header = serde_json::from_value(root.clone()).map_err(|e| Error::Schema(e.to_string()))?;
    match header.schema.as_deref() {
        Some(SCHEMA) => {}
        Some(other) => return Err(Error::Schema(format!("unsupported schema '{other}', expected '{SCHEMA}'"))),
        None => return Err(Error::Schema("missing 'schema' field".into())),
    }
    match header.kind.as_deref() {
        Some(k) if k == T::KIND => {}
        Some(k) => return Err(Error::Schema(format!("document is a '{k}', expected '{}'", T::KIND))),
        None => return Err(Error::Schema("missing 'kind' field".into())),
    }
    // The body is read from the original text so that errors point at the
    // right line; envelope keys are ignored there and stray keys caught here.
    let wire: T::Wire = serde_json::from_str(text).map_err(|e| Error::Schema(format!("{} body: {e}", T::KIND)))?;
    let known = serde_json::to_value(&wire)?;
    if let (Value::Object(given), Value::Object(known)) = (&root, &known) {
        let envelope = ["schema", "kind", "meta"];
        if let Some(key) = given.keys().find(|k| !envelope.contains(&k.as_str()) && !known.contains_key(*k)) {
            return Err(Error::Schema(format!("{} body: unknown field `{key}`{}", T::KIND, key_position(text, key))));
        }
    }
    Ok((T::from_wire(wire)?, header.meta))
}

/// ` at line L` for the first occurrence of `"key"` in `text`.
fn key_position(text: &str, key: &str) -> String {
    let quoted = format!("\"{key}\"");
    match text.find(&quoted) {
        Some(at) => format!(" at line {}", text[..at].matches('\n').count() + 1),
        None => String::new(),
    }
}

pub fn read_file<T: Document>(path: impl AsRef<Path>) -> Result<(T, Meta)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    from_json(&text).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_file<T: Document>(path: impl AsRef<Path>, value: &T, meta: &Meta) -> Result<()> {
    std::fs::write(path, to_json(value, meta)?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalWire {
    pub poles: Vec<[f64; 2]>,
    pub mode_shapes: ComplexMatrix,
    pub part_factors: ComplexMatrix,
    pub lower_residual: RealMatrix,
    pub upper_residual: RealMatrix,
}

impl Document for ModalModel {
    const KIND: &'static str = "modal-model";
    type Wire = ModalWire;

    fn to_wire(&self) -> ModalWire {
        ModalWire {
            poles: self.poles().iter().map(|p| [p.re, p.im]).collect(),
            mode_shapes: self.mode_shapes().into(),
            part_factors: self.part_factors().into(),
            lower_residual: self.lower_residual().into(),
            upper_residual: self.upper_residual().into(),
        }
    }

    fn from_wire(w: ModalWire) -> Result<Self> {
        let poles = w.poles.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        let m = ModalModel::new(
            poles,
            w.mode_shapes.to_matrix("mode_shapes")?,
            w.part_factors.to_matrix("part_factors")?,
            w.lower_residual.to_matrix("lower_residual")?,
            w.upper_residual.to_matrix("upper_residual")?,
        );
        field("modal-model", m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceWire {
    pub domain: Domain,
    pub representation: Representation,
    #[serde(default)]
    pub provenance: String,
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub c: ComplexMatrix,
    pub d: ComplexMatrix,
}

impl Document for StateSpaceModel {
    const KIND: &'static str = "state-space";
    type Wire = StateSpaceWire;

    fn to_wire(&self) -> StateSpaceWire {
        StateSpaceWire {
            domain: self.domain(),
            representation: self.representation(),
            provenance: self.provenance().to_string(),
            a: self.a().into(),
            b: self.b().into(),
            c: self.c().into(),
            d: self.d().into(),
        }
    }

    fn from_wire(w: StateSpaceWire) -> Result<Self> {
        let m = StateSpaceModel::new(
            w.a.to_matrix("a")?,
            w.b.to_matrix("b")?,
            w.c.to_matrix("c")?,
            w.d.to_matrix("d")?,
            w.domain,
            w.representation,
        );
        Ok(field("state-space", m)?.with_provenance(w.provenance))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrfWire {
    pub domain: Domain,
    pub freq_hz: Vec<f64>,
    /// One matrix per frequency line.
    pub values: Vec<ComplexMatrix>,
}

impl Document for FrfSet {
    const KIND: &'static str = "frf-set";
    type Wire = FrfWire;

    fn to_wire(&self) -> FrfWire {
        FrfWire {
            domain: self.domain(),
            freq_hz: self.grid().iter().map(|&w| rad_to_hz(w)).collect(),
            values: self.values().iter().map(ComplexMatrix::from).collect(),
        }
    }

    fn from_wire(w: FrfWire) -> Result<Self> {
        let values = w
            .values
            .iter()
            .enumerate()
            .map(|(k, m)| m.to_matrix(&format!("values[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        let grid = w.freq_hz.iter().map(|&f| hz_to_rad(f)).collect();
        field("frf-set", FrfSet::new(grid, values, w.domain))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapRow {
    pub row: usize,
    pub plus_output: usize,
    pub minus_output: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapWire {
    pub n_outputs: usize,
    pub rows: Vec<MapRow>,
}

impl Document for InterfaceMap {
    const KIND: &'static str = "interface-map";
    type Wire = MapWire;

    fn to_wire(&self) -> MapWire {
        MapWire {
            n_outputs: self.n_outputs(),
            rows: self
                .pairs()
                .iter()
                .enumerate()
                .map(|(row, p)| MapRow { row, plus_output: p.plus_output, minus_output: p.minus_output })
                .collect(),
        }
    }

    fn from_wire(w: MapWire) -> Result<Self> {
        let mut rows = w.rows;
        rows.sort_by_key(|r| r.row);
        if rows.iter().enumerate().any(|(k, r)| r.row != k) {
            return Err(Error::Schema("interface-map rows must be numbered 0..n without gaps".into()));
        }
        let pairs =
            rows.iter().map(|r| InterfacePair { plus_output: r.plus_output, minus_output: r.minus_output }).collect();
        field("interface-map", InterfaceMap::new(w.n_outputs, pairs))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcmWire {
    pub omega_lr_hz: f64,
    pub xi_lr: f64,
    pub omega_ur_hz: f64,
    pub xi_ur: f64,
    pub omega_cb_hz: f64,
    pub xi_cb: f64,
}

impl Document for RcmConfig {
    const KIND: &'static str = "rcm-config";
    type Wire = RcmWire;

    fn to_wire(&self) -> RcmWire {
        RcmWire {
            omega_lr_hz: rad_to_hz(self.omega_lr),
            xi_lr: self.xi_lr,
            omega_ur_hz: rad_to_hz(self.omega_ur),
            xi_ur: self.xi_ur,
            omega_cb_hz: rad_to_hz(self.omega_cb),
            xi_cb: self.xi_cb,
        }
    }

    fn from_wire(w: RcmWire) -> Result<Self> {
        let cfg = RcmConfig::new(
            hz_to_rad(w.omega_lr_hz),
            w.xi_lr,
            hz_to_rad(w.omega_ur_hz),
            w.xi_ur,
            hz_to_rad(w.omega_cb_hz),
            w.xi_cb,
        );
        field("rcm-config", cfg)
    }
}
