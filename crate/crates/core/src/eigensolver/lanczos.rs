//! Thick-restart block Lanczos for the largest eigenvalues of `A⁻¹B`,
//! self-adjoint in the A inner product.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{KornError, Result};

use super::factor::Factor;

/// Ritz values this close (relative) belong to one eigenvalue.
const DEGENERATE: f64 = 1e-10;

pub(crate) trait PencilOps: Sync {
    fn dim(&self) -> usize;
    fn apply_a(&self, x: &[f64], y: &mut [f64]);
    fn apply_b(&self, x: &[f64], y: &mut [f64]);
}

/// `x ↦ x − Σ r_k ⟨m_k, x⟩` with `m_k = M r_k`.
pub(crate) struct Projector {
    pub basis: Vec<Vec<f64>>,
    pub m_basis: Vec<Vec<f64>>,
}

impl Projector {
    pub(crate) fn apply(&self, x: &mut [f64]) {
        for _ in 0..2 {
            for (r, mr) in self.basis.iter().zip(&self.m_basis) {
                let s = dot(mr, x);
                axpy(-s, r, x);
            }
        }
    }

    /// `x ↦ x − Σ m_k ⟨r_k, x⟩`: strips the constraint multipliers from a
    /// residual of the deflated problem.
    pub(crate) fn apply_transpose(&self, x: &mut [f64]) {
        for _ in 0..2 {
            for (r, mr) in self.basis.iter().zip(&self.m_basis) {
                let s = dot(r, x);
                axpy(-s, mr, x);
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Settings {
    pub tolerance: f64,
    pub max_restarts: usize,
    pub block: usize,
    pub ncv: usize,
    pub keep: usize,
    pub seed: u64,
}

pub(crate) struct Outcome {
    /// Ascending pencil eigenvalues `λ = 1/θ` of the leading Ritz block.
    pub ritz: Vec<f64>,
    pub vector: Vec<f64>,
    /// `‖A v − λ B v‖ / ‖A v‖` for the reported vector, constraint
    /// multipliers removed.
    pub residual: f64,
    pub restarts: usize,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

struct Basis {
    v: Vec<Vec<f64>>,
    av: Vec<Vec<f64>>,
    bv: Vec<Vec<f64>>,
}

struct Solver<'a> {
    ops: &'a dyn PencilOps,
    proj: Option<&'a Projector>,
    rng: ChaCha8Rng,
}

impl Solver<'_> {
    fn random_vector(&mut self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.ops.dim()).map(|_| StandardNormal.sample(&mut self.rng)).collect();
        if let Some(p) = self.proj {
            p.apply(&mut x);
        }
        x
    }

    fn orth_against(basis: &Basis, w: &mut [f64]) {
        let coeffs: Vec<f64> = basis.av.iter().map(|a| dot(a, w)).collect();
        for (c, v) in coeffs.iter().zip(&basis.v) {
            axpy(-c, v, w);
        }
    }

    /// A-orthonormalize `block` against `basis` and itself; returns the
    /// block with its A- and B-images.
    fn orthonormalize(&mut self, basis: &Basis, mut block: Vec<Vec<f64>>) -> Result<Basis> {
        let n = self.ops.dim();
        let mut out = Basis {
            v: Vec::new(),
            av: Vec::new(),
            bv: Vec::new(),
        };
        for mut w in block.drain(..) {
            let mut accepted = false;
            for _attempt in 0..4 {
                let mut aw = vec![0.0; n];
                self.ops.apply_a(&w, &mut aw);
                let original = dot(&w, &aw).max(0.0).sqrt();
                let mut norm = original;
                // Gram–Schmidt with fresh A-images until the norm stops dropping
                for _pass in 0..3 {
                    let prev = norm;
                    Self::orth_against(basis, &mut w);
                    Self::orth_against(&out, &mut w);
                    // rigid parts carry no A-norm, so A-orthogonality cannot hold them down
                    if let Some(p) = self.proj {
                        p.apply(&mut w);
                    }
                    self.ops.apply_a(&w, &mut aw);
                    norm = dot(&w, &aw).max(0.0).sqrt();
                    if norm > 0.7 * prev || norm <= 1e-8 * original {
                        break;
                    }
                }
                if norm > 1e-8 * original && norm > 0.0 {
                    w.iter_mut().for_each(|x| *x /= norm);
                    aw.iter_mut().for_each(|x| *x /= norm);
                    let mut bw = vec![0.0; n];
                    self.ops.apply_b(&w, &mut bw);
                    out.v.push(w);
                    out.av.push(aw);
                    out.bv.push(bw);
                    accepted = true;
                    break;
                }
                w = self.random_vector();
            }
            if !accepted {
                return Err(KornError::Data("Krylov basis breakdown: admissible space exhausted".into()));
            }
        }
        Ok(out)
    }
}

pub(crate) fn largest_modes(
    ops: &dyn PencilOps,
    factor: &Factor,
    proj: Option<&Projector>,
    settings: &Settings,
) -> Result<Outcome> {
    let n = ops.dim();
    let b = settings.block.max(1);
    let cap = n.saturating_sub(proj.map_or(0, |p| p.basis.len()));
    if cap == 0 {
        return Err(KornError::config("no admissible degrees of freedom"));
    }
    // basis sizes stay multiples of the block until the space is exhausted
    let ncv = settings.ncv.max(2 * b).div_ceil(b) * b;
    let keep = (settings.keep.clamp(b, ncv - b) / b) * b;
    let mut solver = Solver {
        ops,
        proj,
        rng: ChaCha8Rng::seed_from_u64(settings.seed),
    };
    let mut basis = Basis {
        v: Vec::new(),
        av: Vec::new(),
        bv: Vec::new(),
    };
    let start: Vec<Vec<f64>> = (0..b.min(cap)).map(|_| solver.random_vector()).collect();
    let mut pending = solver.orthonormalize(&basis, start)?;
    let mut restarts = 0usize;
    let mut last;
    let mut h = DMatrix::<f64>::zeros(0, 0);

    loop {
        // move the pending block into the basis and expand
        let room = ncv - basis.v.len();
        let take = pending.v.len().min(room);
        let mut rhs = Vec::new();
        for ((v, av), bv) in pending.v.drain(..take).zip(pending.av.drain(..take)).zip(pending.bv.drain(..take)) {
            rhs.push(bv.clone());
            basis.v.push(v);
            basis.av.push(av);
            basis.bv.push(bv);
        }
        let full = basis.v.len() >= ncv || basis.v.len() >= cap;
        if basis.v.len() < cap {
            let mut next = factor.solve_block(&rhs);
            if let Some(p) = proj {
                next.iter_mut().for_each(|x| p.apply(x));
            }
            let width = next.len().min(cap - basis.v.len());
            next.truncate(width);
            pending = solver.orthonormalize(&basis, next)?;
        }

        // Rayleigh–Ritz
        let m = basis.v.len();
        let old = h.nrows();
        h = h.resize(m, m, 0.0);
        for i in 0..m {
            for j in old.max(i)..m {
                let x = 0.5 * (dot(&basis.v[i], &basis.bv[j]) + dot(&basis.v[j], &basis.bv[i]));
                h[(i, j)] = x;
                h[(j, i)] = x;
            }
        }
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let theta = eig.eigenvalues[order[0]];
        if !(theta > 0.0) {
            return Err(KornError::config(
                "denominator form is not positive on the admissible space",
            ));
        }
        let combine = |vs: &[Vec<f64>], s: &nalgebra::DVector<f64>| -> Vec<f64> {
            let mut x = vec![0.0; n];
            for (k, v) in vs.iter().enumerate() {
                axpy(s[k], v, &mut x);
            }
            x
        };
        let residual = |s: &nalgebra::DVector<f64>, lambda: f64| -> f64 {
            let ax = combine(&basis.av, s);
            let bx = combine(&basis.bv, s);
            let mut r: Vec<f64> = ax.iter().zip(&bx).map(|(a, b)| a - lambda * b).collect();
            if let Some(p) = proj {
                p.apply_transpose(&mut r);
            }
            let anorm = dot(&ax, &ax).sqrt();
            let res = dot(&r, &r).sqrt();
            if anorm > 0.0 {
                res / anorm
            } else {
                res
            }
        };
        // within a degenerate top cluster any member is a minimizer; report
        // the best converged one
        let mut lambda = 1.0 / theta;
        let mut s = eig.eigenvectors.column(order[0]).clone_owned();
        let mut rel = residual(&s, lambda);
        for &k in order.iter().take(b).skip(1) {
            let t = eig.eigenvalues[k];
            if (theta - t).abs() > DEGENERATE * theta {
                break;
            }
            let sk = eig.eigenvectors.column(k).clone_owned();
            let rk = residual(&sk, 1.0 / t);
            if rk < rel {
                lambda = 1.0 / t;
                s = sk;
                rel = rk;
            }
        }
        last = (lambda, rel);
        let exhausted = m >= cap;
        if rel <= settings.tolerance || exhausted {
            let ritz: Vec<f64> = order.iter().take(b).map(|&k| 1.0 / eig.eigenvalues[k]).collect();
            let vector = combine(&basis.v, &s);
            return Ok(Outcome {
                ritz,
                vector,
                residual: rel,
                restarts,
            });
        }
        if full {
            if restarts >= settings.max_restarts {
                break;
            }
            restarts += 1;
            let sk = DMatrix::from_fn(m, keep, |i, j| eig.eigenvectors[(i, order[j])]);
            let mix = |vs: &[Vec<f64>]| -> Vec<Vec<f64>> {
                (0..keep)
                    .map(|j| {
                        let col = sk.column(j).clone_owned();
                        combine(vs, &col)
                    })
                    .collect()
            };
            // fresh A-orthonormalization stops rounding drift from compounding
            let empty = Basis {
                v: Vec::new(),
                av: Vec::new(),
                bv: Vec::new(),
            };
            basis = solver.orthonormalize(&empty, mix(&basis.v))?;
            h = DMatrix::from_fn(keep, keep, |i, j| {
                0.5 * (dot(&basis.v[i], &basis.bv[j]) + dot(&basis.v[j], &basis.bv[i]))
            });
            let carried = std::mem::take(&mut pending.v);
            pending = solver.orthonormalize(&basis, carried)?;
            if pending.v.is_empty() {
                let fresh: Vec<Vec<f64>> = (0..b).map(|_| solver.random_vector()).collect();
                pending = solver.orthonormalize(&basis, fresh)?;
            }
        }
    }
    Err(KornError::NonConvergence {
        iterations: restarts,
        last_ritz: last.0,
        residual: last.1,
    })
}
