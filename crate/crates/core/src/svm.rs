//! SVM dual solver: sequential minimal optimization with
//! maximal-violating-pair working-set selection.
//!
//! Solves `max Q(α) = Σ α_i − ½ Σ α_i α_j y_i y_j K_ij` subject to
//! `Σ α_i y_i = 0` and `0 ≤ α_i ≤ C` for a fixed kernel matrix. The bias
//! is recovered by averaging over free support vectors, falling back to
//! the midpoint of the feasible bias interval when none are free.

use ndarray::ArrayView2;
use thiserror::Error;

const TAU: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("kernel matrix must be square, got {rows}x{cols}")]
    NonSquareKernel { rows: usize, cols: usize },
    #[error("kernel matrix is not symmetric (max asymmetry {0:.3e})")]
    AsymmetricKernel(f64),
    #[error("labels must be ±1, got {0} at index {1}")]
    BadLabel(f64, usize),
    #[error("kernel size {kernel} does not match label count {labels}")]
    SizeMismatch { kernel: usize, labels: usize },
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("SMO did not reach tolerance {tol} within {iterations} pair updates (violation {violation:.3e})")]
    NotConverged {
        tol: f64,
        iterations: usize,
        violation: f64,
        /// Best iterate found before hitting the iteration cap.
        best: DualSolution,
    },
    #[error("decision row length {row} does not match training size {expected}")]
    RowLengthMismatch { row: usize, expected: usize },
}

/// Solution of the dual problem for a fixed kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// Dual coefficients in `[0, C]`.
    pub alpha: Vec<f64>,
    /// Bias of the decision function.
    pub b: f64,
    /// Attained dual objective.
    pub objective: f64,
    /// Indices with `α_i > 0`.
    pub support_indices: Vec<usize>,
}

fn validate_inputs(k: ArrayView2<f64>, y: &[f64]) -> Result<(), SvmError> {
    let n = k.nrows();
    if n != k.ncols() {
        return Err(SvmError::NonSquareKernel { rows: n, cols: k.ncols() });
    }
    if n != y.len() {
        return Err(SvmError::SizeMismatch { kernel: n, labels: y.len() });
    }
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((k[[i, j]] - k[[j, i]]).abs());
        }
    }
    if max_asym > 1e-10 {
        return Err(SvmError::AsymmetricKernel(max_asym));
    }
    let mut pos = false;
    let mut neg = false;
    for (i, &yi) in y.iter().enumerate() {
        if yi == 1.0 {
            pos = true;
        } else if yi == -1.0 {
            neg = true;
        } else {
            return Err(SvmError::BadLabel(yi, i));
        }
    }
    if !(pos && neg) {
        return Err(SvmError::SingleClass);
    }
    Ok(())
}

/// Solve the dual with SMO. `tol` bounds the final KKT violation.
pub fn solve_dual(
    k: ArrayView2<f64>,
    y: &[f64],
    c: f64,
    tol: f64,
) -> Result<DualSolution, SvmError> {
    solve_dual_traced(k, y, c, tol, None)
}

/// As [`solve_dual`], optionally recording the dual objective after every
/// pair update (diagnostic; the sequence is non-decreasing).
pub fn solve_dual_traced(
    k: ArrayView2<f64>,
    y: &[f64],
    c: f64,
    tol: f64,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<DualSolution, SvmError> {
    assert!(c > 0.0, "C must be positive");
    assert!(tol > 0.0, "tolerance must be positive");
    validate_inputs(k, y)?;
    let n = y.len();

    let mut alpha = vec![0.0f64; n];
    // Gradient of the minimization form ½αᵀQα − Σα, Q_ij = y_i y_j K_ij.
    let mut grad = vec![-1.0f64; n];
    // 10·n² pair updates, floored so tiny problems at tight tolerances
    // still get room to converge.
    let max_updates = (10 * n * n).max(100_000);

    let mut iterations = 0usize;
    let violation = loop {
        // Maximal violating pair.
        let mut i_best: Option<usize> = None;
        let mut i_val = f64::NEG_INFINITY;
        let mut j_best: Option<usize> = None;
        let mut j_val = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up && v > i_val {
                i_val = v;
                i_best = Some(t);
            }
            if in_low && v < j_val {
                j_val = v;
                j_best = Some(t);
            }
        }
        let (i, j) = match (i_best, j_best) {
            (Some(i), Some(j)) => (i, j),
            _ => break 0.0,
        };
        let violation = i_val - j_val;
        if violation <= tol {
            break violation;
        }
        if iterations >= max_updates {
            let best = finish(&alpha, &grad, k, y, c);
            return Err(SvmError::NotConverged {
                tol,
                iterations,
                violation,
                best,
            });
        }
        iterations += 1;

        // Two-variable analytic step (minimization form).
        let old_ai = alpha[i];
        let old_aj = alpha[j];
        if y[i] != y[j] {
            let mut quad = k[[i, i]] + k[[j, j]] + 2.0 * k[[i, j]];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else {
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            }
        } else {
            let mut quad = k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[[t, i]] * dai + y[j] * k[[t, j]] * daj);
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(objective_from_grad(&alpha, &grad));
        }
    };
    let _ = violation;

    Ok(finish(&alpha, &grad, k, y, c))
}

/// Dual objective `Q(α) = Σα − ½ αᵀQα`, using `αᵀQα = αᵀ(grad + e)`.
fn objective_from_grad(alpha: &[f64], grad: &[f64]) -> f64 {
    let sum_alpha: f64 = alpha.iter().sum();
    let dot: f64 = alpha.iter().zip(grad).map(|(a, g)| a * g).sum();
    0.5 * (sum_alpha - dot)
}

fn finish(alpha: &[f64], grad: &[f64], k: ArrayView2<f64>, y: &[f64], c: f64) -> DualSolution {
    let n = alpha.len();
    // u_i = Σ_j α_j y_j K_ij, the decision value without bias.
    let mut u = vec![0.0f64; n];
    for j in 0..n {
        if alpha[j] == 0.0 {
            continue;
        }
        let w = alpha[j] * y[j];
        for (i, ui) in u.iter_mut().enumerate() {
            *ui += w * k[[i, j]];
        }
    }

    let free_margin = 1e-8 * c;
    let mut b_sum = 0.0;
    let mut b_count = 0usize;
    for i in 0..n {
        if alpha[i] > free_margin && alpha[i] < c - free_margin {
            b_sum += y[i] - u[i];
            b_count += 1;
        }
    }
    let b = if b_count > 0 {
        b_sum / b_count as f64
    } else {
        // Feasible interval from the bound constraints.
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..n {
            let target = y[i] - u[i];
            let at_zero = alpha[i] <= free_margin;
            if (y[i] > 0.0) == at_zero {
                lo = lo.max(target);
            } else {
                hi = hi.min(target);
            }
        }
        if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else if lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            0.0
        }
    };

    DualSolution {
        alpha: alpha.to_vec(),
        b,
        objective: objective_from_grad(alpha, grad),
        support_indices: (0..n).filter(|&i| alpha[i] > 0.0).collect(),
    }
}

/// Decision value `Σ α_i y_i K(x_i, x) + b` for an already-combined
/// kernel row. The caller takes the sign: +1 normal, −1 attack.
pub fn decision(sol: &DualSolution, y: &[f64], kernel_row: &[f64]) -> Result<f64, SvmError> {
    if kernel_row.len() != sol.alpha.len() || y.len() != sol.alpha.len() {
        return Err(SvmError::RowLengthMismatch {
            row: kernel_row.len(),
            expected: sol.alpha.len(),
        });
    }
    let mut acc = sol.b;
    for &i in &sol.support_indices {
        acc += sol.alpha[i] * y[i] * kernel_row[i];
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_problem_by_hand() {
        let k = array![[1.0, 0.0], [0.0, 1.0]];
        let y = [1.0, -1.0];
        let sol = solve_dual(k.view(), &y, 10.0, 1e-8).unwrap();
        assert_relative_eq!(sol.alpha[0], 1.0, epsilon = 1e-7);
        assert_relative_eq!(sol.alpha[1], 1.0, epsilon = 1e-7);
        assert_relative_eq!(sol.objective, 1.0, epsilon = 1e-7);
        assert_relative_eq!(sol.b, 0.0, epsilon = 1e-7);
        assert_eq!(sol.support_indices, vec![0, 1]);
        // Decision at point 0 lands in the +1 region.
        let row = [1.0, 0.0];
        assert!(decision(&sol, &y, &row).unwrap() > 0.0);
    }

    fn rbf_gram(x: &[Vec<f64>], gamma: f64) -> Array2<f64> {
        let n = x.len();
        Array2::from_shape_fn((n, n), |(i, j)| {
            let sq: f64 = x[i]
                .iter()
                .zip(&x[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (-gamma * sq).exp()
        })
    }

    #[test]
    fn separable_data_classified_correctly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x: Vec<Vec<f64>> = Vec::new();
        let mut y = Vec::new();
        for _ in 0..20 {
            x.push(vec![rng.random_range(-1.0..-0.3), rng.random_range(-1.0..1.0)]);
            y.push(1.0);
            x.push(vec![rng.random_range(0.3..1.0), rng.random_range(-1.0..1.0)]);
            y.push(-1.0);
        }
        let k = rbf_gram(&x, 0.5);
        let sol = solve_dual(k.view(), &y, 1000.0, 1e-6).unwrap();
        for i in 0..x.len() {
            let row: Vec<f64> = (0..x.len()).map(|j| k[[i, j]]).collect();
            let f = decision(&sol, &y, &row).unwrap();
            assert!(f * y[i] > 0.0, "point {i} misclassified: f = {f}");
        }
    }

    #[test]
    fn feasibility_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..20 {
            let n = rng.random_range(4..12);
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
                .collect();
            let mut y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            y[0] = 1.0;
            y[1] = -1.0;
            let c = [0.5, 10.0, 100.0][trial % 3];
            let k = rbf_gram(&x, 1.0);
            let sol = solve_dual(k.view(), &y, c, 1e-6).unwrap();
            let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, yi)| a * yi).sum();
            assert!(balance.abs() <= 1e-8, "Σ α y = {balance}");
            assert!(sol.alpha.iter().all(|&a| (-1e-12..=c + 1e-12).contains(&a)));
            // KKT: free support vectors sit on the margin.
            for i in 0..n {
                if sol.alpha[i] > 1e-6 * c && sol.alpha[i] < c * (1.0 - 1e-6) {
                    let row: Vec<f64> = (0..n).map(|j| k[[i, j]]).collect();
                    let f = decision(&sol, &y, &row).unwrap();
                    assert!(
                        (f - y[i]).abs() < 1e-3,
                        "free SV {i} off margin: f = {f}, y = {}",
                        y[i]
                    );
                }
            }
        }
    }

    #[test]
    fn objective_trace_is_non_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 16;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let k = rbf_gram(&x, 0.7);
        let mut trace = Vec::new();
        solve_dual_traced(k.view(), &y, 5.0, 1e-8, Some(&mut trace)).unwrap();
        assert!(trace.len() >= 2);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "objective decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn permutation_changes_alpha_consistently() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let y: Vec<f64> = (0..n).map(|i| if i < 5 { 1.0 } else { -1.0 }).collect();
        let k = rbf_gram(&x, 1.3);
        let sol = solve_dual(k.view(), &y, 10.0, 1e-10).unwrap();

        let perm: Vec<usize> = {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            p
        };
        let xp: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let kp = rbf_gram(&xp, 1.3);
        let solp = solve_dual(kp.view(), &yp, 10.0, 1e-10).unwrap();

        assert_relative_eq!(sol.objective, solp.objective, epsilon = 1e-8);
        assert_relative_eq!(sol.b, solp.b, epsilon = 1e-8);
        for (slot, &orig) in perm.iter().enumerate() {
            assert_relative_eq!(solp.alpha[slot], sol.alpha[orig], epsilon = 1e-8);
        }
    }

    #[test]
    fn single_class_rejected() {
        let k = array![[1.0, 0.5], [0.5, 1.0]];
        assert!(matches!(
            solve_dual(k.view(), &[1.0, 1.0], 1.0, 1e-3),
            Err(SvmError::SingleClass)
        ));
    }

    #[test]
    fn asymmetric_kernel_rejected() {
        let k = array![[1.0, 0.5], [0.2, 1.0]];
        assert!(matches!(
            solve_dual(k.view(), &[1.0, -1.0], 1.0, 1e-3),
            Err(SvmError::AsymmetricKernel(_))
        ));
    }

    #[test]
    fn bad_label_rejected() {
        let k = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            solve_dual(k.view(), &[1.0, 0.0], 1.0, 1e-3),
            Err(SvmError::BadLabel(_, 1))
        ));
    }

    #[test]
    fn decision_with_zero_alphas_returns_bias() {
        let sol = DualSolution {
            alpha: vec![0.0, 0.0],
            b: 0.5,
            objective: 0.0,
            support_indices: vec![],
        };
        let f = decision(&sol, &[1.0, -1.0], &[0.3, 0.9]).unwrap();
        assert_eq!(f, 0.5);
    }

    #[test]
    fn decision_length_mismatch_errors() {
        let sol = DualSolution {
            alpha: vec![0.0, 0.0],
            b: 0.0,
            objective: 0.0,
            support_indices: vec![],
        };
        assert!(matches!(
            decision(&sol, &[1.0, -1.0], &[0.3]),
            Err(SvmError::RowLengthMismatch { .. })
        ));
    }
}
