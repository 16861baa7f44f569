//! Truncated multivariate Taylor jets up to third order.
//!
//! A [`Jet`] carries a value together with its gradient, Hessian and third
//! derivative tensor with respect to `n` chart coordinates. Arithmetic
//! propagates them exactly, which is how model charts supply analytic metric
//! derivatives without hand-expanded formulas.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    n: usize,
    order: u8,
    value: f64,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl Jet {
    fn sizes(n: usize, order: u8) -> (usize, usize, usize) {
        (
            if order >= 1 { n } else { 0 },
            if order >= 2 { n * n } else { 0 },
            if order >= 3 { n * n * n } else { 0 },
        )
    }

    pub fn constant(n: usize, order: u8, value: f64) -> Self {
        assert!(order <= 3, "jets are truncated at third order");
        let (s1, s2, s3) = Self::sizes(n, order);
        Self {
            n,
            order,
            value,
            d1: vec![0.0; s1],
            d2: vec![0.0; s2],
            d3: vec![0.0; s3],
        }
    }

    /// The coordinate function `u ↦ u[axis]` expanded at `u`.
    pub fn variable(u: &[f64], order: u8, axis: usize) -> Self {
        let mut jet = Self::constant(u.len(), order, u[axis]);
        if order >= 1 {
            jet.d1[axis] = 1.0;
        }
        jet
    }

    pub fn variables(u: &[f64], order: u8) -> Vec<Self> {
        (0..u.len()).map(|a| Self::variable(u, order, a)).collect()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn d1(&self, a: usize) -> f64 {
        if self.order >= 1 {
            self.d1[a]
        } else {
            0.0
        }
    }

    pub fn d2(&self, a: usize, b: usize) -> f64 {
        if self.order >= 2 {
            self.d2[a * self.n + b]
        } else {
            0.0
        }
    }

    pub fn d3(&self, a: usize, b: usize, c: usize) -> f64 {
        if self.order >= 3 {
            self.d3[(a * self.n + b) * self.n + c]
        } else {
            0.0
        }
    }

    fn check(&self, other: &Self) {
        assert_eq!(self.n, other.n, "jet variable counts differ");
        assert_eq!(self.order, other.order, "jet orders differ");
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n: self.n,
            order: self.order,
            value: self.value * c,
            d1: self.d1.iter().map(|v| v * c).collect(),
            d2: self.d2.iter().map(|v| v * c).collect(),
            d3: self.d3.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add_const(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.value += c;
        out
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        self.check(other);
        let z = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect();
        Self {
            n: self.n,
            order: self.order,
            value: f(self.value, other.value),
            d1: z(&self.d1, &other.d1),
            d2: z(&self.d2, &other.d2),
            d3: z(&self.d3, &other.d3),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check(other);
        let n = self.n;
        let (f, g) = (self, other);
        let mut out = Self::constant(n, self.order, f.value * g.value);
        if self.order >= 1 {
            for a in 0..n {
                out.d1[a] = f.d1[a] * g.value + f.value * g.d1[a];
            }
        }
        if self.order >= 2 {
            for a in 0..n {
                for b in 0..n {
                    let ab = a * n + b;
                    out.d2[ab] = f.d2[ab] * g.value + f.d1[a] * g.d1[b] + f.d1[b] * g.d1[a] + f.value * g.d2[ab];
                }
            }
        }
        if self.order >= 3 {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let abc = (a * n + b) * n + c;
                        let (ab, ac, bc) = (a * n + b, a * n + c, b * n + c);
                        out.d3[abc] = f.d3[abc] * g.value
                            + f.d2[ab] * g.d1[c]
                            + f.d2[ac] * g.d1[b]
                            + f.d2[bc] * g.d1[a]
                            + f.d1[a] * g.d2[bc]
                            + f.d1[b] * g.d2[ac]
                            + f.d1[c] * g.d2[ab]
                            + f.value * g.d3[abc];
                    }
                }
            }
        }
        out
    }

    /// Composition `φ ∘ self` given `φ` and its first three derivatives at
    /// `self.value()`.
    pub fn compose(&self, phi: [f64; 4]) -> Self {
        let n = self.n;
        let [p0, p1, p2, p3] = phi;
        let mut out = Self::constant(n, self.order, p0);
        if self.order >= 1 {
            for a in 0..n {
                out.d1[a] = p1 * self.d1[a];
            }
        }
        if self.order >= 2 {
            for a in 0..n {
                for b in 0..n {
                    let ab = a * n + b;
                    out.d2[ab] = p2 * self.d1[a] * self.d1[b] + p1 * self.d2[ab];
                }
            }
        }
        if self.order >= 3 {
            let f1 = &self.d1;
            let f2 = &self.d2;
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let abc = (a * n + b) * n + c;
                        out.d3[abc] = p3 * f1[a] * f1[b] * f1[c]
                            + p2 * (f2[a * n + b] * f1[c] + f2[a * n + c] * f1[b] + f2[b * n + c] * f1[a])
                            + p1 * self.d3[abc];
                    }
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Self {
        let x = self.value;
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.compose([e, e, e, e])
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet::mul(self, rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
