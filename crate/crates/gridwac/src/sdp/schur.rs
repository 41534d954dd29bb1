//! Linear maps of the vectorized problem and the HKM Schur complement.

use super::{LmiProblem, VarSpec};
use crate::par::{self, Exec};
use crate::Mat;
use std::f64::consts::FRAC_1_SQRT_2;

/// Variables with at most this many coordinates get explicit `A_i`.
const EXPLICIT_DIM: usize = 8;

#[derive(Debug, Clone)]
struct CTerm {
    var: usize,
    l: Mat,
    r: Mat,
}

#[derive(Debug, Clone)]
pub(crate) struct CBlock {
    pub size: usize,
    /// `−(F0 + margin·I)`.
    pub c: Mat,
    terms: Vec<CTerm>,
}

/// Products for one term pair `(t, s)` inside one block.
struct PairProd {
    p1: Mat,
    q1: Mat,
    p2t: Mat,
    q2: Mat,
    p3: Mat,
    q3: Mat,
    p4t: Mat,
    q4: Mat,
}

/// The problem compiled into SDPA dual form.
pub(crate) struct Operator {
    pub vars: Vec<VarSpec>,
    pub offsets: Vec<usize>,
    pub blocks: Vec<CBlock>,
    /// Coordinate expansions `(a, b, weight)` per variable.
    expand: Vec<Vec<Vec<(usize, usize, f64)>>>,
    explicit: Vec<bool>,
}

fn expansion(v: &VarSpec) -> Vec<Vec<(usize, usize, f64)>> {
    let mut out = Vec::with_capacity(v.dim());
    if v.symmetric {
        for a in 0..v.rows {
            for b in a..v.rows {
                if a == b {
                    out.push(vec![(a, a, 1.0)]);
                } else {
                    out.push(vec![(a, b, FRAC_1_SQRT_2), (b, a, FRAC_1_SQRT_2)]);
                }
            }
        }
    } else {
        for a in 0..v.rows {
            for b in 0..v.cols {
                out.push(vec![(a, b, 1.0)]);
            }
        }
    }
    out
}

/// Merge terms that share a variable and one of their factors.
fn merge_terms(terms: &[super::Term]) -> Vec<CTerm> {
    let mut out: Vec<CTerm> = Vec::new();
    for t in terms {
        if let Some(m) = out.iter_mut().find(|m| m.var == t.var && m.r == t.r) {
            m.l += &t.l;
        } else if let Some(m) = out.iter_mut().find(|m| m.var == t.var && m.l == t.l) {
            m.r += &t.r;
        } else {
            out.push(CTerm { var: t.var, l: t.l.clone(), r: t.r.clone() });
        }
    }
    out
}

impl Operator {
    pub fn new(p: &LmiProblem) -> Self {
        let blocks = p
            .blocks
            .iter()
            .map(|b| {
                let mut c = -b.f0.clone();
                for i in 0..b.size {
                    c[(i, i)] -= b.margin;
                }
                let c = (&c + c.transpose()) * 0.5;
                CBlock { size: b.size, c, terms: merge_terms(&b.terms) }
            })
            .collect();
        Self {
            vars: p.vars.clone(),
            offsets: p.offsets(),
            blocks,
            expand: p.vars.iter().map(expansion).collect(),
            explicit: p.vars.iter().map(|v| v.dim() <= EXPLICIT_DIM).collect(),
        }
    }

    pub fn n_coords(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    fn coord_var(&self, i: usize) -> (usize, usize) {
        let k = self.offsets.partition_point(|&o| o <= i) - 1;
        (k, i - self.offsets[k])
    }

    /// `𝒜(K)_i = tr(A_i K)`; `K` need not be symmetric.
    pub fn apply(&self, k: &[Mat]) -> Vec<f64> {
        let mut t: Vec<Mat> = self.vars.iter().map(|v| Mat::zeros(v.cols, v.rows)).collect();
        for (blk, km) in self.blocks.iter().zip(k) {
            let ks = km + km.transpose();
            for term in &blk.terms {
                t[term.var] += &term.r * &ks * &term.l;
            }
        }
        let mut out = Vec::with_capacity(self.n_coords());
        for (v, tv) in self.expand.iter().zip(&t) {
            for e in v {
                out.push(e.iter().map(|&(a, b, w)| w * tv[(b, a)]).sum());
            }
        }
        out
    }

    /// `𝒜*(y) = Σ_i y_i A_i` per block.
    pub fn adjoint(&self, y: &[f64]) -> Vec<Mat> {
        let vals: Vec<Mat> = self
            .vars
            .iter()
            .enumerate()
            .map(|(k, v)| super::unpack_var(v, &y[self.offsets[k]..self.offsets[k + 1]]))
            .collect();
        self.blocks
            .iter()
            .map(|blk| {
                let mut f = Mat::zeros(blk.size, blk.size);
                for t in &blk.terms {
                    let lvr = &t.l * &vals[t.var] * &t.r;
                    f += &lvr + lvr.transpose();
                }
                f
            })
            .collect()
    }

    /// Explicit `A_i` per block for coordinate `i`.
    fn basis_matrix(&self, i: usize) -> Vec<Mat> {
        let (k, local) = self.coord_var(i);
        let v = &self.vars[k];
        let mut e = Mat::zeros(v.rows, v.cols);
        for &(a, b, w) in &self.expand[k][local] {
            e[(a, b)] += w;
        }
        self.blocks
            .iter()
            .map(|blk| {
                let mut f = Mat::zeros(blk.size, blk.size);
                for t in blk.terms.iter().filter(|t| t.var == k) {
                    let lvr = &t.l * &e * &t.r;
                    f += &lvr + lvr.transpose();
                }
                f
            })
            .collect()
    }

    /// Frobenius norm of each `A_i`, used for the starting point.
    pub fn basis_norms(&self) -> Vec<f64> {
        let n = self.n_coords();
        let mut out = vec![0.0; n];
        for blk in &self.blocks {
            for t in &blk.terms {
                let start = self.offsets[t.var];
                let lcol: Vec<f64> = (0..t.l.ncols()).map(|a| t.l.column(a).norm()).collect();
                let rrow: Vec<f64> = (0..t.r.nrows()).map(|b| t.r.row(b).norm()).collect();
                for (local, e) in self.expand[t.var].iter().enumerate() {
                    let s: f64 = e.iter().map(|&(a, b, w)| w * lcol[a] * rrow[b]).sum();
                    out[start + local] += 2.0 * s * s;
                }
            }
        }
        out.into_iter().map(f64::sqrt).collect()
    }

    /// Schur complement `M_ij = tr(A_i X A_j Z⁻¹)` for the HKM direction.
    pub fn schur(&self, x: &[Mat], g: &[Mat], exec: Exec) -> Mat {
        let n = self.n_coords();
        let nv = self.vars.len();
        // prods[k][l] for k ≤ l over structured variables
        let mut prods: Vec<Vec<Vec<PairProd>>> = (0..nv).map(|_| (0..nv).map(|_| Vec::new()).collect()).collect();
        for (blk, (xm, gm)) in self.blocks.iter().zip(x.iter().zip(g)) {
            for t in &blk.terms {
                if self.explicit[t.var] {
                    continue;
                }
                let lt_x = t.l.transpose() * xm;
                let rt_x = &t.r * xm;
                let g_lt = gm * &t.l;
                let g_rt = gm * t.r.transpose();
                for s in &blk.terms {
                    if self.explicit[s.var] || s.var < t.var {
                        continue;
                    }
                    let st = s.r.transpose();
                    prods[t.var][s.var].push(PairProd {
                        p1: &rt_x * &s.l,
                        q1: &s.r * &g_lt,
                        p2t: (&rt_x * &st).transpose(),
                        q2: s.l.transpose() * &g_lt,
                        p3: &lt_x * &s.l,
                        q3: &s.r * &g_rt,
                        p4t: (&lt_x * &st).transpose(),
                        q4: s.l.transpose() * &g_rt,
                    });
                }
            }
        }

        let structured_rows: Vec<usize> = (0..n).filter(|&i| !self.explicit[self.coord_var(i).0]).collect();
        let rows = par::map_indexed(exec, structured_rows.len(), |r| {
            let i = structured_rows[r];
            let (k, local) = self.coord_var(i);
            let mut seg = vec![0.0; n - self.offsets[k]];
            for l in k..nv {
                if self.explicit[l] || prods[k][l].is_empty() {
                    continue;
                }
                let vl = &self.vars[l];
                let (rl, cl) = (vl.rows, vl.cols);
                let mut full = vec![0.0; rl * cl];
                for &(a, b, w) in &self.expand[k][local] {
                    for pp in &prods[k][l] {
                        let q1a = pp.q1.column(a);
                        let p2b = pp.p2t.column(b);
                        let q3b = pp.q3.column(b);
                        let p4a = pp.p4t.column(a);
                        for c in 0..rl {
                            let s1 = w * pp.p1[(b, c)];
                            let s2 = w * pp.q2[(c, a)];
                            let s3 = w * pp.p3[(a, c)];
                            let s4 = w * pp.q4[(c, b)];
                            let row = &mut full[c * cl..(c + 1) * cl];
                            for d in 0..cl {
                                row[d] += s1 * q1a[d] + s2 * p2b[d] + s3 * q3b[d] + s4 * p4a[d];
                            }
                        }
                    }
                }
                let base = self.offsets[l] - self.offsets[k];
                for (j, e) in self.expand[l].iter().enumerate() {
                    seg[base + j] = e.iter().map(|&(c, d, w)| w * full[c * cl + d]).sum();
                }
            }
            seg
        });

        let var_of: Vec<usize> = (0..n).map(|i| self.coord_var(i).0).collect();
        let mut m = Mat::zeros(n, n);
        for (r, seg) in rows.into_iter().enumerate() {
            let i = structured_rows[r];
            let start = self.offsets[var_of[i]];
            for (j, v) in seg.into_iter().enumerate() {
                m[(i, start + j)] = v;
            }
        }
        for j in 0..n {
            for i in 0..j {
                let v = if var_of[i] == var_of[j] { 0.5 * (m[(i, j)] + m[(j, i)]) } else { m[(i, j)] };
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }

        let explicit_coords: Vec<usize> = (0..n).filter(|&i| self.explicit[var_of[i]]).collect();
        let cols = par::map_indexed(exec, explicit_coords.len(), |r| {
            let ai = self.basis_matrix(explicit_coords[r]);
            let k: Vec<Mat> = ai.iter().zip(x.iter().zip(g)).map(|(a, (xm, gm))| xm * a * gm).collect();
            self.apply(&k)
        });
        for (r, col) in cols.into_iter().enumerate() {
            let i = explicit_coords[r];
            for (j, v) in col.into_iter().enumerate() {
                m[(j, i)] = v;
                m[(i, j)] = v;
            }
        }
        m
    }
}
