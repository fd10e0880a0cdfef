//! Double-double arithmetic (about 32 significant digits) and a forward pass
//! written with it, so finite differences are not limited by f64 rounding.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::Result;
use crate::nn::{LossKind, Mlp};
use crate::tensor::Matrix;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn renorm(hi: f64, lo: f64) -> Dd {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    /// Scales by `2^k` exactly.
    fn ldexp(self, k: i32) -> Dd {
        let f = 2f64.powi(k);
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn max(self, other: Dd) -> Dd {
        if (self - other).hi >= 0.0 {
            self
        } else {
            other
        }
    }

    pub fn exp(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ONE;
        }
        let k = (self.hi / LN2.hi).round();
        // r = (x - k ln2) / 2^10, then exp(x) = exp(r)^(2^10) * 2^k
        let r = (self - LN2 * Dd::from_f64(k)).ldexp(-10);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for n in 1..=14 {
            term = term * r / Dd::from_f64(n as f64);
            sum = sum + term;
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        sum.ldexp(k as i32)
    }

    /// Natural log by Newton steps on `exp(y) = x` from the f64 estimate.
    pub fn ln(self) -> Dd {
        let mut y = Dd::from_f64(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::renorm(s, e + f)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        Dd::renorm(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from_f64(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from_f64(q2);
        let q3 = r.hi / o.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Dd { hi: q1, lo: q2 } + Dd::from_f64(q3)
    }
}

/// Row-major `rows x cols` grid of double-doubles.
#[derive(Clone, Debug)]
pub struct DdMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Dd>,
}

impl DdMatrix {
    pub fn from_matrix(m: &Matrix) -> Self {
        DdMatrix {
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().iter().map(|&v| Dd::from_f64(v)).collect(),
        }
    }

    fn at(&self, r: usize, c: usize) -> Dd {
        self.data[r * self.cols + c]
    }

    /// `self * rhs^T`.
    fn matmul_t(&self, rhs: &DdMatrix) -> DdMatrix {
        let mut data = Vec::with_capacity(self.rows * rhs.rows);
        for i in 0..self.rows {
            for j in 0..rhs.rows {
                let mut acc = Dd::ZERO;
                for k in 0..self.cols {
                    acc = acc + self.at(i, k) * rhs.at(j, k);
                }
                data.push(acc);
            }
        }
        DdMatrix {
            rows: self.rows,
            cols: rhs.rows,
            data,
        }
    }

    /// `self * rhs`.
    fn matmul(&self, rhs: &DdMatrix) -> DdMatrix {
        let mut data = Vec::with_capacity(self.rows * rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = Dd::ZERO;
                for k in 0..self.cols {
                    acc = acc + self.at(i, k) * rhs.at(k, j);
                }
                data.push(acc);
            }
        }
        DdMatrix {
            rows: self.rows,
            cols: rhs.cols,
            data,
        }
    }

    fn add(&self, rhs: &DdMatrix) -> DdMatrix {
        DdMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

/// One parameter entry shifted by an exact offset.
#[derive(Clone, Copy, Debug)]
pub struct Bump {
    pub which: super::ParamSelector,
    pub index: usize,
    pub offset: f64,
}

fn bumped(m: &Matrix, here: bool, bump: Option<Bump>) -> DdMatrix {
    let mut d = DdMatrix::from_matrix(m);
    if let (true, Some(b)) = (here, bump) {
        d.data[b.index] = d.data[b.index] + Dd::from_f64(b.offset);
    }
    d
}

/// Loss of `model` at `W + deltas`, evaluated in double-double with one
/// optional parameter entry shifted by `bump.offset`.
pub fn exact_loss(
    model: &Mlp,
    x: &Matrix,
    y: &[usize],
    deltas: Option<&[Matrix]>,
    loss: LossKind,
    bump: Option<Bump>,
) -> Result<Dd> {
    use super::ParamSelector as P;
    let last = model.layers().len() - 1;
    let mut h = DdMatrix::from_matrix(x);
    for (l, layer) in model.layers().iter().enumerate() {
        let mut w = DdMatrix::from_matrix(layer.frozen_weight());
        if let Some(pair) = layer.live() {
            let on_b = matches!(bump, Some(Bump { which: P::LiveB(i), .. }) if i == l);
            let on_a = matches!(bump, Some(Bump { which: P::LiveA(i), .. }) if i == l);
            let b = bumped(&pair.b, on_b, bump);
            let a = bumped(&pair.a, on_a, bump);
            w = w.add(&b.matmul(&a));
        }
        if let Some(d) = deltas {
            w = w.add(&DdMatrix::from_matrix(&d[l]));
        }
        let mut z = h.matmul_t(&w);
        if let Some(bias) = layer.bias() {
            for r in 0..z.rows {
                for (c, &bv) in bias.iter().enumerate() {
                    let v = &mut z.data[r * z.cols + c];
                    *v = *v + Dd::from_f64(bv);
                }
            }
        }
        if l < last {
            z.data.iter_mut().for_each(|v| {
                if v.hi < 0.0 || (v.hi == 0.0 && v.lo <= 0.0) {
                    *v = Dd::ZERO;
                }
            });
        }
        h = z;
    }
    let n = h.rows;
    let classes = model.num_classes();
    let mut logits = DdMatrix {
        rows: n,
        cols: classes,
        data: vec![Dd::ZERO; n * classes],
    };
    let mut offset = 0;
    for (bi, block) in model.head().blocks().iter().enumerate() {
        let on = matches!(bump, Some(Bump { which: P::HeadWeight(i), .. }) if i == bi);
        let z = h.matmul_t(&bumped(&block.weight, on, bump));
        for i in 0..n {
            for c in 0..block.classes() {
                logits.data[i * classes + offset + c] = z.at(i, c) + Dd::from_f64(block.bias[(0, c)]);
            }
        }
        offset += block.classes();
    }
    let mut total = Dd::ZERO;
    for (i, &label) in y.iter().enumerate() {
        let row = &logits.data[i * classes..(i + 1) * classes];
        match loss {
            LossKind::CrossEntropy => {
                let m = row.iter().copied().fold(row[0], Dd::max);
                let s = row.iter().fold(Dd::ZERO, |acc, &v| acc + (v - m).exp());
                total = total + (m + s.ln()) - row[label];
            }
            LossKind::HalfSquared => {
                for (c, &v) in row.iter().enumerate() {
                    let t = if c == label { v - Dd::ONE } else { v };
                    total = total + Dd::from_f64(0.5) * t * t;
                }
            }
        }
    }
    Ok(total / Dd::from_f64(n.max(1) as f64))
}
