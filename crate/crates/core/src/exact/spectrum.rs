//! Low-lying spectra per `J^z` sector and the tower of states.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::krylov::{lowest_dense, lowest_lanczos};
use super::ExactEngine;
use crate::error::Result;

#[derive(Clone, Copy, Debug)]
pub struct SpectrumOptions {
    /// Eigenpairs per sector.
    pub n_states: usize,
    /// Ritz residual tolerance.
    pub tol: f64,
    /// Sectors up to this dimension are diagonalized densely.
    pub dense_limit: usize,
    /// Start Lanczos from the symmetric Dicke vector, which confines it to
    /// the fully symmetric (lattice-invariant) subspace of the sector.
    pub symmetric_start: bool,
    pub seed: u64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { n_states: 6, tol: 1e-9, dense_limit: 400, symmetric_start: true, seed: 17 }
    }
}

/// Lowest eigenpairs of one sector with their overlap on the Dicke state
/// `|N/2, M>` (the sector projection of `|CSS_x>`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorSpectrum {
    pub m: f64,
    pub energies: Vec<f64>,
    pub overlaps: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Index of the state with the largest Dicke overlap.
    pub tos_index: usize,
}

impl SectorSpectrum {
    pub fn tos_energy(&self) -> f64 {
        self.energies[self.tos_index]
    }
}

pub fn sector_spectrum(engine: &ExactEngine, n_up: usize, opts: &SpectrumOptions) -> Result<SectorSpectrum> {
    let block = engine.block(n_up);
    let d = block.dim();
    let dicke = vec![1.0 / (d as f64).sqrt(); d];
    let pairs = if d <= opts.dense_limit {
        lowest_dense(&block.to_dense(), opts.n_states)
    } else if opts.symmetric_start {
        lowest_lanczos_from(block, &dicke, opts)?
    } else {
        lowest_lanczos(|x, y| block.apply(x, y), d, opts.n_states, opts.tol, opts.seed)?
    };
    let overlaps: Vec<f64> = pairs
        .vectors
        .iter()
        .map(|v| v.iter().zip(&dicke).map(|(a, b)| a * b).sum::<f64>().powi(2))
        .collect();
    let tos_index = overlaps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    Ok(SectorSpectrum { m: block.m(), energies: pairs.values, overlaps, residuals: pairs.residuals, tos_index })
}

/// Lanczos seeded with `start`; stops at the dimension of the invariant
/// subspace it generates.
fn lowest_lanczos_from(
    block: &super::SectorBlock,
    start: &[f64],
    opts: &SpectrumOptions,
) -> Result<super::krylov::Eigenpairs> {
    use nalgebra::{DMatrix, SymmetricEigen};
    let d = start.len();
    let mut basis: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; d];
    let max_iter = d.min(600);
    loop {
        let j = basis.len() - 1;
        block.apply(&basis[j], &mut w);
        alpha.push(basis[j].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>());
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = q.iter().zip(&w).map(|(a, b)| a * b).sum();
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let m = alpha.len();
        let exhausted = b < 1e-10 || m == max_iter;
        if m % 5 == 0 || exhausted {
            let t = DMatrix::from_fn(m, m, |r, c| match r as isize - c as isize {
                0 => alpha[r],
                -1 => beta[r],
                1 => beta[c],
                _ => 0.0,
            });
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
            let k = opts.n_states.min(m);
            let res: Vec<f64> = order[..k].iter().map(|&c| (b * eig.eigenvectors[(m - 1, c)]).abs()).collect();
            if exhausted || (m >= opts.n_states && res.iter().all(|&r| r < opts.tol)) {
                let mut out = super::krylov::Eigenpairs { values: vec![], vectors: vec![], residuals: vec![] };
                for (&c, r) in order[..k].iter().zip(res) {
                    let mut x = vec![0.0; d];
                    for (row, q) in basis.iter().enumerate() {
                        let y = eig.eigenvectors[(row, c)];
                        x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += y * qi);
                    }
                    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    x.iter_mut().for_each(|v| *v /= nx);
                    out.values.push(eig.eigenvalues[c]);
                    out.vectors.push(x);
                    out.residuals.push(r);
                }
                return Ok(out);
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

/// Spectra of every sector `M = -N/2 ..= N/2`.
pub fn tower_spectrum(engine: &ExactEngine, opts: &SpectrumOptions) -> Result<Vec<SectorSpectrum>> {
    (0..=engine.n_sites()).map(|k| sector_spectrum(engine, k, opts)).collect()
}

/// CSV with columns `M, n, E, overlap, residual, is_tos`.
pub fn write_spectrum_csv<W: Write>(spectra: &[SectorSpectrum], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["M", "n", "E", "overlap", "residual", "is_tos"])?;
    for s in spectra {
        for (i, e) in s.energies.iter().enumerate() {
            wr.write_record([
                format!("{}", s.m),
                i.to_string(),
                format!("{:.14e}", e),
                format!("{:.10e}", s.overlaps[i]),
                format!("{:.3e}", s.residuals[i]),
                u8::from(i == s.tos_index).to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeSpec, XxModel};
    use approx::assert_relative_eq;

    #[test]
    fn alpha_zero_tower_is_rotor() {
        // H = (J^z)²/(2N) - (J(J+1) - N/2)/(2N) on the maximal-spin multiplet.
        let e = ExactEngine::new(XxModel::new(&LatticeSpec::square(3, 0.0)).unwrap()).unwrap();
        let n = 9.0;
        let j = n / 2.0;
        let opts = SpectrumOptions { dense_limit: 10, ..Default::default() };
        let tower = tower_spectrum(&e, &opts).unwrap();
        for s in &tower {
            let expect = (s.m * s.m - j * (j + 1.0) + n / 2.0) / (2.0 * n);
            assert_relative_eq!(s.tos_energy(), expect, epsilon = 1e-9);
            assert_relative_eq!(s.overlaps[s.tos_index], 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let e = ExactEngine::new(XxModel::new(&LatticeSpec::square(3, 3.0)).unwrap()).unwrap();
        let dense =
            sector_spectrum(&e, 4, &SpectrumOptions { dense_limit: 1000, n_states: 200, ..Default::default() })
                .unwrap();
        let lz = sector_spectrum(
            &e,
            4,
            &SpectrumOptions { dense_limit: 0, symmetric_start: false, n_states: 3, ..Default::default() },
        )
        .unwrap();
        // A single Lanczos chain resolves each degenerate level once.
        assert_relative_eq!(dense.energies[0], lz.energies[0], epsilon = 1e-8);
        for e in &lz.energies {
            assert!(dense.energies.iter().any(|d| (d - e).abs() < 1e-8));
        }
        let sym = sector_spectrum(&e, 4, &SpectrumOptions { dense_limit: 0, ..Default::default() }).unwrap();
        assert_relative_eq!(sym.tos_energy(), dense.tos_energy(), epsilon = 1e-8);
        let mut buf = Vec::new();
        write_spectrum_csv(&[dense], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("M,n,E"));
    }
}
