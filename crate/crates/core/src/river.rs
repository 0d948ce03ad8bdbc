//! Exact joint cdf of river-network generators.
//!
//! Every node receives an independent unit-exponential input and passes its total flow
//! downstream, so `R_j = E_j + Σ_{c upstream of j} R_c`. Restricting the flow at a node to
//! the event that all constraints in its catchment hold gives a sub-density of the form
//! `e^{-x} p(x)` with `p` piecewise polynomial, and these convolve in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed forest: `downstream[j]` is the node that `j` drains into, `None` for outlets.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RiverParams", into = "RiverParams")]
pub struct River {
    downstream: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Upstream nodes first.
    order: Vec<usize>,
    /// Number of exponential inputs feeding each node (its catchment size).
    counts: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiverParams {
    pub downstream: Vec<Option<usize>>,
}

impl TryFrom<RiverParams> for River {
    type Error = Error;
    fn try_from(p: RiverParams) -> Result<River> {
        River::new(p.downstream)
    }
}

impl From<River> for RiverParams {
    fn from(r: River) -> RiverParams {
        RiverParams {
            downstream: r.downstream,
        }
    }
}

impl PartialEq for River {
    fn eq(&self, other: &River) -> bool {
        self.downstream == other.downstream
    }
}

impl River {
    pub fn new(downstream: Vec<Option<usize>>) -> Result<River> {
        let d = downstream.len();
        if d == 0 {
            return Err(Error::Model("river network needs at least one node".into()));
        }
        let mut children = vec![Vec::new(); d];
        for (j, down) in downstream.iter().enumerate() {
            if let Some(k) = *down {
                if k >= d || k == j {
                    return Err(Error::Model(format!("node {j} drains into invalid node {k}")));
                }
                children[k].push(j);
            }
        }
        let mut order = Vec::with_capacity(d);
        let mut state = vec![0u8; d];
        fn visit(j: usize, children: &[Vec<usize>], state: &mut [u8], order: &mut Vec<usize>) {
            state[j] = 1;
            for &c in &children[j] {
                visit(c, children, state, order);
            }
            state[j] = 2;
            order.push(j);
        }
        for j in 0..d {
            if downstream[j].is_none() {
                visit(j, &children, &mut state, &mut order);
            }
        }
        if order.len() != d {
            return Err(Error::Model("river network contains a cycle".into()));
        }
        let mut counts = vec![1usize; d];
        for &j in &order {
            for &c in &children[j] {
                counts[j] += counts[c];
            }
        }
        Ok(River {
            downstream,
            children,
            order,
            counts,
        })
    }

    pub fn dim(&self) -> usize {
        self.downstream.len()
    }

    pub fn downstream(&self) -> &[Option<usize>] {
        &self.downstream
    }

    pub fn children(&self, j: usize) -> &[usize] {
        &self.children[j]
    }

    pub fn outlets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(|&j| self.downstream[j].is_none())
    }

    /// Catchment size of node `j`; its marginal law is Gamma(count, 1).
    pub fn count(&self, j: usize) -> usize {
        self.counts[j]
    }

    /// Nodes ordered so that every node comes after all of its upstream nodes.
    pub fn topological(&self) -> &[usize] {
        &self.order
    }

    /// The node's own input `r_j - Σ_children r_c`.
    pub fn local_input(&self, j: usize, r: &[f64]) -> f64 {
        r[j] - self.children[j].iter().map(|&c| r[c]).sum::<f64>()
    }

    /// Weight of each exponential input in `Σ a_j R_j`.
    pub fn input_weights(&self, a: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut w = vec![0.0; d];
        for &j in self.order.iter().rev() {
            w[j] = a[j] + self.downstream[j].map_or(0.0, |k| w[k]);
        }
        w
    }

    pub fn cdf(&self, r: &[f64]) -> f64 {
        if r.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        let cap = |x: f64| x.min(800.0);
        let mut sub: Vec<Option<Pw>> = vec![None; self.dim()];
        let mut total = 1.0;
        for &j in &self.order {
            let rj = cap(r[j]);
            let p = if self.children[j].is_empty() {
                vec![Piece {
                    lo: 0.0,
                    hi: rj,
                    c: vec![1.0],
                }]
            } else {
                let mut acc = sub[self.children[j][0]].take().unwrap();
                for &c in &self.children[j][1..] {
                    acc = convolve(&acc, sub[c].as_ref().unwrap());
                }
                cumulative(&acc, rj)
            };
            if self.downstream[j].is_none() {
                total *= tilted_mass(&p);
            } else {
                sub[j] = Some(p);
            }
        }
        total.clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug)]
struct Piece {
    lo: f64,
    hi: f64,
    c: Vec<f64>,
}

type Pw = Vec<Piece>;

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_add_into(acc: &mut Vec<f64>, b: &[f64], scale: f64) {
    if acc.len() < b.len() {
        acc.resize(b.len(), 0.0);
    }
    for (a, &v) in acc.iter_mut().zip(b) {
        *a += scale * v;
    }
}

fn binom(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Coefficients of `(x - c)^n`.
fn shifted_power(c: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| binom(n, i) * (-c).powi((n - i) as i32))
        .collect()
}

/// Either a constant or `x - c`.
#[derive(Clone, Copy)]
enum Limit {
    Const(f64),
    Shift(f64),
}

impl Limit {
    fn power(self, n: usize) -> Vec<f64> {
        match self {
            Limit::Const(c) => vec![c.powi(n as i32)],
            Limit::Shift(c) => shifted_power(c, n),
        }
    }
}

/// `∫_{L(x)}^{U(x)} f(s) g(x - s) ds` as a polynomial in `x`.
fn conv_poly(f: &[f64], g: &[f64], lower: Limit, upper: Limit) -> Vec<f64> {
    let deg = f.len() + g.len();
    // a[i][p]: coefficient of x^i s^p in f(s) g(x - s)
    let mut a = vec![vec![0.0; deg + 1]; deg + 1];
    for (k, &fk) in f.iter().enumerate() {
        if fk == 0.0 {
            continue;
        }
        for (m, &gm) in g.iter().enumerate() {
            if gm == 0.0 {
                continue;
            }
            for i in 0..=m {
                let sign = if (m - i) % 2 == 0 { 1.0 } else { -1.0 };
                a[i][k + m - i] += fk * gm * binom(m, i) * sign;
            }
        }
    }
    let mut out = Vec::new();
    for (i, row) in a.iter().enumerate() {
        for (p, &coef) in row.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            let up = upper.power(p + 1);
            let lo = lower.power(p + 1);
            let mut diff = up;
            poly_add_into(&mut diff, &lo, -1.0);
            let mut shifted = vec![0.0; i];
            shifted.extend(diff.iter().map(|v| v * coef / (p + 1) as f64));
            poly_add_into(&mut out, &shifted, 1.0);
        }
    }
    out
}

fn convolve(f: &Pw, g: &Pw) -> Pw {
    let mut raw: Vec<Piece> = Vec::new();
    for pf in f {
        for pg in g {
            let (a1, b1, a2, b2) = (pf.lo, pf.hi, pg.lo, pg.hi);
            let t1 = a1 + a2;
            let t2 = a1 + b2;
            let t3 = b1 + a2;
            let t4 = b1 + b2;
            let (m1, m2) = (t2.min(t3), t2.max(t3));
            let middle = if t2 <= t3 {
                (Limit::Shift(b2), Limit::Shift(a2))
            } else {
                (Limit::Const(a1), Limit::Const(b1))
            };
            let regions = [
                (t1, m1, Limit::Const(a1), Limit::Shift(a2)),
                (m1, m2, middle.0, middle.1),
                (m2, t4, Limit::Shift(b2), Limit::Const(b1)),
            ];
            for (lo, hi, l, u) in regions {
                if hi > lo {
                    raw.push(Piece {
                        lo,
                        hi,
                        c: conv_poly(&pf.c, &pg.c, l, u),
                    });
                }
            }
        }
    }
    merge(raw)
}

fn merge(raw: Vec<Piece>) -> Pw {
    let mut cuts: Vec<f64> = raw.iter().flat_map(|p| [p.lo, p.hi]).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let mut c = Vec::new();
        for p in &raw {
            if p.lo <= mid && mid < p.hi {
                poly_add_into(&mut c, &p.c, 1.0);
            }
        }
        if !c.is_empty() {
            out.push(Piece { lo, hi, c });
        }
    }
    out
}

/// `x ↦ ∫_0^x p`, restricted to `[0, upto]`.
fn cumulative(p: &Pw, upto: f64) -> Pw {
    let mut out = Vec::new();
    let mut base = 0.0;
    let mut last = 0.0;
    for piece in p {
        if piece.lo >= upto {
            break;
        }
        if piece.lo > last {
            out.push(Piece {
                lo: last,
                hi: piece.lo,
                c: vec![base],
            });
        }
        let mut anti: Vec<f64> = vec![0.0];
        anti.extend(piece.c.iter().enumerate().map(|(k, &v)| v / (k + 1) as f64));
        let shift = base - poly_eval(&anti, piece.lo);
        anti[0] += shift;
        let hi = piece.hi.min(upto);
        base = poly_eval(&anti, piece.hi);
        out.push(Piece {
            lo: piece.lo,
            hi,
            c: anti,
        });
        last = piece.hi;
    }
    if last < upto {
        out.push(Piece {
            lo: last,
            hi: upto,
            c: vec![base],
        });
    }
    out
}

/// `∫_a^∞ e^{-x} x^k dx` for k = 0..=n.
fn upper_tilted_moments(a: f64, n: usize) -> Vec<f64> {
    let ea = (-a).exp();
    let mut out = Vec::with_capacity(n + 1);
    let mut fact = 1.0;
    let mut term = 1.0;
    let mut partial = 1.0;
    out.push(ea);
    for k in 1..=n {
        fact *= k as f64;
        term *= a / k as f64;
        partial += term;
        out.push(fact * ea * partial);
    }
    out
}

fn tilted_mass(p: &Pw) -> f64 {
    p.iter()
        .map(|piece| {
            let n = piece.c.len() - 1;
            let lo = upper_tilted_moments(piece.lo, n);
            let hi = upper_tilted_moments(piece.hi, n);
            piece
                .c
                .iter()
                .enumerate()
                .map(|(k, &c)| c * (lo[k] - hi[k]))
                .sum::<f64>()
        })
        .sum()
}
