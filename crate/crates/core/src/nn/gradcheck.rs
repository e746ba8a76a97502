//! Finite-difference verification of tape gradients.

use rand::seq::index::sample;

use super::ParamStore;
use crate::error::{Error, Result};
use crate::rng::{stream, Role};
use crate::tensor::{Tape, Var};

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is ~0 are judged on absolute error instead. A bias feeding batch
/// norm has an exactly-zero gradient, and its extrapolated difference is
/// rounding noise around 1e-9.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Number of central differences in the extrapolation tableau and the
/// step shrink factor between them.
const TABLEAU: usize = 10;
const SHRINK: f64 = 1.4;

/// Tableaux are started at `h` and at each further decade below it. The
/// coarsest one that agrees with the next within `AGREE` (relative, with
/// `AGREE_FLOOR` as the smallest scale) is taken, otherwise the one with
/// the smallest error estimate.
const STARTS: usize = 4;
const AGREE: f64 = 1e-5;
const AGREE_FLOOR: f64 = 1e-4;

/// First step for [`grad_check`] on network-sized objectives; the
/// tableaux below it reach steps of about 1e-7.
pub const DEFAULT_FIRST_STEP: f64 = 1e-2;

/// Minimum number of coordinates checked when the store has that many.
pub const MIN_COORDINATES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateCheck {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checks: Vec<CoordinateCheck>,
    /// Coordinates where even the smallest steps crossed a ReLU kink; the
    /// function is not differentiable there, so they are excluded from the
    /// maximum.
    pub skipped_at_kinks: usize,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&CoordinateCheck> {
        self.checks.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares the tape gradient of the scalar built by `f` against central
/// differences on every trainable coordinate, or on a seeded sample of
/// `max(sample, 200)` of them when the store is larger.
///
/// The numeric derivative is Ridders' extrapolation: central differences
/// at steps `h, h/1.4, h/1.4², …` are combined in a Richardson tableau and
/// the entry with the smallest error estimate wins. Tableaux start at `h`
/// and each decade below, and the coarsest one confirmed by its finer
/// neighbor is kept: large steps keep rounding noise away from exactly-zero
/// gradients (a bias feeding batch norm), while batch norm over a few nearly
/// equal rows can bend sharply within 1e-3, and a single tableau's own error
/// estimate does not always notice. Steps whose evaluations change any activation sign are
/// dropped; extrapolation starts from the first step that does not.
pub fn grad_check<F>(store: &ParamStore, f: F, h: f64, sample_size: usize, seed: u64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    let base_signs = tape.activation_signs().to_vec();
    let grads = tape.backward(loss)?;
    let analytic: Vec<(String, crate::tensor::Tensor)> = grads.params(&tape).map(|(n, g)| (n.to_string(), g)).collect();

    let mut coords: Vec<(String, usize, f64)> = Vec::new();
    for (name, entry) in store.iter().filter(|(_, e)| e.trainable) {
        let g = analytic.iter().find(|(n, _)| n == name);
        for i in 0..entry.value.len() {
            let a = g.map_or(0.0, |(_, t)| t.data()[i]);
            coords.push((name.to_string(), i, a));
        }
    }
    let want = sample_size.max(MIN_COORDINATES);
    if coords.len() > want {
        let mut rng = stream(seed, Role::GradCheck, 0, 0);
        let mut picked = sample(&mut rng, coords.len(), want).into_vec();
        picked.sort_unstable();
        coords = picked.into_iter().map(|k| coords[k].clone()).collect();
    }

    let eval = |probe: &ParamStore| -> Result<(f64, bool)> {
        let mut t = Tape::new();
        let l = f(&mut t, probe)?;
        let v = t.value(l).get(0, 0);
        if !v.is_finite() {
            return Err(Error::NonFinite("grad_check objective".into()));
        }
        Ok((v, t.activation_signs() == base_signs.as_slice()))
    };

    let mut probe = store.clone();
    let mut checks = Vec::with_capacity(coords.len());
    let mut skipped = 0;
    for (name, i, a) in coords {
        let original = probe.get(&name)?.clone();
        let mut at = |offset: f64| -> Result<(f64, bool)> {
            let mut moved = original.clone();
            moved.data_mut()[i] += offset;
            probe.set(&name, moved)?;
            eval(&probe)
        };
        let mut tableau = |first: f64| -> Result<Option<(f64, f64)>> {
            let mut diffs = Vec::with_capacity(TABLEAU);
            let mut step = first;
            for _ in 0..TABLEAU {
                let (fp, sp) = at(step)?;
                let (fm, sm) = at(-step)?;
                if sp && sm {
                    diffs.push((fp - fm) / (2.0 * step));
                } else {
                    diffs.clear();
                }
                step /= SHRINK;
            }
            Ok(ridders(&diffs))
        };
        let mut best: Option<(f64, f64)> = None;
        let mut coarser: Option<(f64, f64)> = None;
        for d in 0..STARTS {
            let here = tableau(h / 10f64.powi(d as i32))?;
            if let (Some((c, _)), Some((v, _))) = (coarser, here) {
                if (c - v).abs() <= AGREE * c.abs().max(AGREE_FLOOR) {
                    best = coarser;
                    break;
                }
            }
            if let Some((v, e)) = here {
                if best.is_none_or(|(_, b)| e < b) {
                    best = Some((v, e));
                }
            }
            coarser = here;
        }
        probe.set(&name, original)?;
        let Some((numeric, _)) = best else {
            skipped += 1;
            continue;
        };
        checks.push(CoordinateCheck { rel_error: relative_error(a, numeric), name, index: i, analytic: a, numeric });
    }
    let max_rel_error = checks.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport { max_rel_error, checks, skipped_at_kinks: skipped })
}

/// Richardson extrapolation over central differences taken at steps
/// shrinking by [`SHRINK`], with its error estimate; `None` when fewer
/// than two are available.
fn ridders(diffs: &[f64]) -> Option<(f64, f64)> {
    if diffs.len() < 2 {
        return None;
    }
    let c2 = SHRINK * SHRINK;
    let mut prev = vec![diffs[0]];
    let mut best = diffs[0];
    let mut err = f64::INFINITY;
    for &d in &diffs[1..] {
        let mut row = vec![d];
        let mut fac = c2;
        for j in 1..=prev.len() {
            let v = (row[j - 1] * fac - prev[j - 1]) / (fac - 1.0);
            fac *= c2;
            let e = (v - row[j - 1]).abs().max((v - prev[j - 1]).abs());
            if e <= err {
                err = e;
                best = v;
            }
            row.push(v);
        }
        let n = row.len();
        // Higher orders got worse: the rest of the tableau is noise.
        if (row[n - 1] - prev[n - 2]).abs() >= 2.0 * err {
            break;
        }
        prev = row;
    }
    Some((best, err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn half_squared_norm() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::from_vec(2, 3, vec![0.3, -1.2, 2.0, 0.7, 0.0, -0.4]).unwrap());
        let report = grad_check(
            &store,
            |tape, s| {
                let w = s.bind(tape, "w")?;
                let sq = tape.sum_squares(w)?;
                tape.scale(sq, 0.5)
            },
            1e-5,
            0,
            0,
        )
        .unwrap();
        assert_eq!(report.checks.len(), 6);
        assert!(report.max_rel_error < 1e-9, "{report:?}");
    }

    #[test]
    fn dead_relu_coordinate_has_zero_gradient_both_ways() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::from_vec(1, 2, vec![-1.0, 2.0]).unwrap());
        let report = grad_check(
            &store,
            |tape, s| {
                let w = s.bind(tape, "w")?;
                let r = tape.relu(w)?;
                tape.sum(r)
            },
            1e-5,
            0,
            0,
        )
        .unwrap();
        let dead = report.checks.iter().find(|c| c.index == 0).unwrap();
        assert_eq!(dead.analytic, 0.0);
        assert_eq!(dead.numeric, 0.0);
        assert!(report.max_rel_error < 1e-9);
    }

    #[test]
    fn kink_crossings_are_skipped() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::scalar(1e-11));
        let report = grad_check(
            &store,
            |tape, s| {
                let w = s.bind(tape, "w")?;
                let r = tape.relu(w)?;
                tape.sum(r)
            },
            1e-5,
            0,
            0,
        )
        .unwrap();
        assert_eq!(report.skipped_at_kinks, 1);
        assert!(report.checks.is_empty());
    }

    #[test]
    fn steps_past_a_kink_fall_back_to_smaller_ones() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::scalar(2e-6));
        let report = grad_check(
            &store,
            |tape, s| {
                let w = s.bind(tape, "w")?;
                let r = tape.relu(w)?;
                tape.sum(r)
            },
            1e-5,
            0,
            0,
        )
        .unwrap();
        assert_eq!(report.skipped_at_kinks, 0);
        assert!((report.checks[0].numeric - 1.0).abs() < 1e-9);
    }

    #[test]
    fn extrapolation_removes_truncation_error() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::scalar(-1.3));
        // w⁴ checked with a coarse first step of 0.1.
        let report = grad_check(
            &store,
            |tape, s| {
                let w = s.bind(tape, "w")?;
                let sq = tape.row_scale(w, w)?;
                tape.sum_squares(sq)
            },
            0.1,
            0,
            0,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
    }
}
