//! Collective-spin moments and the time series records shared by all engines.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// First and symmetrized second moments of the collective spin `J`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpinMoments {
    pub n_sites: usize,
    /// `<J^x>, <J^y>, <J^z>`.
    pub mean: [f64; 3],
    /// `<{J^a, J^b}>/2`.
    pub second: [[f64; 3]; 3],
}

impl SpinMoments {
    pub fn covariance(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|a, b| self.second[a][b] - self.mean[a] * self.mean[b])
    }

    pub fn var(&self, axis: usize) -> f64 {
        self.second[axis][axis] - self.mean[axis] * self.mean[axis]
    }

    /// `<J^2>`.
    pub fn j2(&self) -> f64 {
        self.second[0][0] + self.second[1][1] + self.second[2][2]
    }

    /// Squeezing parameter `ξ_R² = N min_⊥ Var(J^⊥) / |<J>|²`, minimized over the
    /// plane orthogonal to the mean spin. Returns `+∞` when `<J>` vanishes.
    pub fn xi2(&self) -> f64 {
        let mean = Vector3::from(self.mean);
        let len2 = mean.norm_squared();
        if len2 < 1e-24 {
            return f64::INFINITY;
        }
        let n = mean / len2.sqrt();
        // Orthonormal pair spanning the plane orthogonal to n.
        let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = n.cross(&helper).normalize();
        let e2 = n.cross(&e1);
        let cov = self.covariance();
        let proj = Matrix2::new(
            e1.dot(&(cov * e1)),
            e1.dot(&(cov * e2)),
            e2.dot(&(cov * e1)),
            e2.dot(&(cov * e2)),
        );
        let tr = proj.trace();
        let det = proj.determinant();
        let lam_min = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
        self.n_sites as f64 * lam_min / len2
    }
}

/// Closed form of the transverse minimum for a mean spin along `x`:
/// `½[<J_y²+J_z²> − √((<J_y²>−<J_z²>)² + <{J_y,J_z}>²)]`.
pub fn min_transverse_variance_x(jy2: f64, jz2: f64, jyjz_anticomm: f64) -> f64 {
    0.5 * ((jy2 + jz2) - ((jy2 - jz2).powi(2) + jyjz_anticomm.powi(2)).sqrt())
}

/// Collective-spin observables of an explicitly stored state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateObservables {
    pub moments: SpinMoments,
    pub parity: f64,
    /// `d<P^z>_θ/dθ` at `θ = 0` for rotations `e^{-iθJ^x}`.
    pub dparity_dtheta: f64,
    pub f_px: f64,
    pub f_mx: f64,
    pub f_ghz: f64,
}

impl StateObservables {
    pub fn var_jx(&self) -> f64 {
        self.moments.var(0)
    }

    pub fn xi2(&self) -> f64 {
        self.moments.xi2()
    }

    pub fn coherence(&self) -> f64 {
        2.0 * self.f_ghz - self.f_px - self.f_mx
    }

    /// Series row at time `t` (Kac time `t_kac`) with energy `energy`.
    pub fn to_row(&self, t: f64, t_kac: f64, energy: f64) -> ObservableRow {
        let mut row = ObservableRow::empty(t);
        row.t_kac = t_kac;
        row.set_moments(&self.moments);
        row.parity = self.parity;
        row.dparity_dtheta = self.dparity_dtheta;
        row.set_fidelities(self.f_ghz, self.f_px, self.f_mx);
        row.energy = energy;
        row
    }
}

/// One sampled time of an observable series. Quantities an engine does not
/// compute are stored as NaN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub t: f64,
    pub t_kac: f64,
    #[serde(rename = "Jx")]
    pub jx: f64,
    #[serde(rename = "VarJx")]
    pub var_jx: f64,
    #[serde(rename = "VarJy")]
    pub var_jy: f64,
    #[serde(rename = "VarJz")]
    pub var_jz: f64,
    #[serde(rename = "JyJz_sym")]
    pub jyjz_sym: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    pub xi2: f64,
    pub parity: f64,
    pub dparity_dtheta: f64,
    #[serde(rename = "C")]
    pub coherence: f64,
    #[serde(rename = "F_GHZ")]
    pub f_ghz: f64,
    #[serde(rename = "F_px")]
    pub f_px: f64,
    #[serde(rename = "F_mx")]
    pub f_mx: f64,
    pub energy: f64,
}

impl ObservableRow {
    pub fn empty(t: f64) -> Self {
        ObservableRow {
            t,
            t_kac: f64::NAN,
            jx: f64::NAN,
            var_jx: f64::NAN,
            var_jy: f64::NAN,
            var_jz: f64::NAN,
            jyjz_sym: f64::NAN,
            j2: f64::NAN,
            xi2: f64::NAN,
            parity: f64::NAN,
            dparity_dtheta: f64::NAN,
            coherence: f64::NAN,
            f_ghz: f64::NAN,
            f_px: f64::NAN,
            f_mx: f64::NAN,
            energy: f64::NAN,
        }
    }

    pub fn set_moments(&mut self, m: &SpinMoments) {
        self.jx = m.mean[0];
        self.var_jx = m.var(0);
        self.var_jy = m.var(1);
        self.var_jz = m.var(2);
        self.jyjz_sym = m.second[1][2];
        self.j2 = m.j2();
        self.xi2 = m.xi2();
    }

    /// Sets the three fidelities and the coherence `C = 2F_GHZ − F_x − F_−x`.
    pub fn set_fidelities(&mut self, f_ghz: f64, f_px: f64, f_mx: f64) {
        self.f_ghz = f_ghz;
        self.f_px = f_px;
        self.f_mx = f_mx;
        self.coherence = 2.0 * f_ghz - f_px - f_mx;
    }

    const COLUMNS: [&'static str; 16] = [
        "t",
        "t_kac",
        "Jx",
        "VarJx",
        "VarJy",
        "VarJz",
        "JyJz_sym",
        "J2",
        "xi2",
        "parity",
        "dparity_dtheta",
        "C",
        "F_GHZ",
        "F_px",
        "F_mx",
        "energy",
    ];

    pub(crate) fn values(&self) -> [f64; 16] {
        [
            self.t,
            self.t_kac,
            self.jx,
            self.var_jx,
            self.var_jy,
            self.var_jz,
            self.jyjz_sym,
            self.j2,
            self.xi2,
            self.parity,
            self.dparity_dtheta,
            self.coherence,
            self.f_ghz,
            self.f_px,
            self.f_mx,
            self.energy,
        ]
    }

    pub(crate) fn from_values(v: &[f64]) -> Self {
        ObservableRow {
            t: v[0],
            t_kac: v[1],
            jx: v[2],
            var_jx: v[3],
            var_jy: v[4],
            var_jz: v[5],
            jyjz_sym: v[6],
            j2: v[7],
            xi2: v[8],
            parity: v[9],
            dparity_dtheta: v[10],
            coherence: v[11],
            f_ghz: v[12],
            f_px: v[13],
            f_mx: v[14],
            energy: v[15],
        }
    }
}

/// Time-ordered observable records, with optional one-sigma error bars.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservableSeries {
    pub rows: Vec<ObservableRow>,
    /// Per-row error bars (the `t` fields repeat the row time).
    pub errors: Option<Vec<ObservableRow>>,
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.12e}")
    }
}

fn parse_value(s: &str) -> f64 {
    match s.trim() {
        "nan" | "NaN" | "" => f64::NAN,
        "inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        other => other.parse().unwrap_or(f64::NAN),
    }
}

impl ObservableSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_errors() -> Self {
        ObservableSeries { rows: Vec::new(), errors: Some(Vec::new()) }
    }

    pub fn push(&mut self, row: ObservableRow) {
        self.rows.push(row);
    }

    pub fn push_with_error(&mut self, row: ObservableRow, err: ObservableRow) {
        self.rows.push(row);
        self.errors.get_or_insert_with(Vec::new).push(err);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn column(&self, f: impl Fn(&ObservableRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn error_column(&self, f: impl Fn(&ObservableRow) -> f64) -> Option<Vec<f64>> {
        self.errors.as_ref().map(|e| e.iter().map(f).collect())
    }

    /// Writes the series as CSV; with error bars each observable column is
    /// followed by a matching `_err` column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let cols = ObservableRow::COLUMNS;
        let mut header: Vec<String> = Vec::new();
        for (k, c) in cols.iter().enumerate() {
            header.push(c.to_string());
            if self.errors.is_some() && k >= 2 {
                header.push(format!("{c}_err"));
            }
        }
        wr.write_record(&header)?;
        for (idx, row) in self.rows.iter().enumerate() {
            let vals = row.values();
            let errs = self.errors.as_ref().map(|e| e[idx].values());
            let mut rec = Vec::with_capacity(header.len());
            for k in 0..cols.len() {
                rec.push(fmt_value(vals[k]));
                if let Some(errs) = &errs {
                    if k >= 2 {
                        rec.push(fmt_value(errs[k]));
                    }
                }
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let pos = |name: &str| header.iter().position(|h| h == name);
        let has_err = header.iter().any(|h| h.ends_with("_err"));
        let mut series = if has_err { Self::with_errors() } else { Self::new() };
        for rec in rd.records() {
            let rec = rec?;
            let get = |name: &str| pos(name).map(|p| parse_value(&rec[p])).unwrap_or(f64::NAN);
            let vals: Vec<f64> = ObservableRow::COLUMNS.iter().map(|c| get(c)).collect();
            let row = ObservableRow::from_values(&vals);
            if has_err {
                let mut evals: Vec<f64> = ObservableRow::COLUMNS
                    .iter()
                    .map(|c| get(&format!("{c}_err")))
                    .collect();
                evals[0] = row.t;
                evals[1] = row.t_kac;
                series.push_with_error(row, ObservableRow::from_values(&evals));
            } else {
                series.push(row);
            }
        }
        Ok(series)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}
