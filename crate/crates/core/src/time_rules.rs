//! Quadrature rules and polynomial operators in time.
//!
//! Rules live on the reference interval `[-1, 1]` and are mapped affinely onto
//! a slab `[t_start, t_end]`. Polynomials in time are stored by their values at
//! the Gauss-Lobatto nodes of their degree, which is also how the continuous
//! Galerkin trial space is parametrized.

use crate::{Error, Result};

/// Largest supported polynomial index.
pub const MAX_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Gauss,
    GaussLobatto,
}

/// A quadrature rule on `[-1, 1]`, exact for polynomials of degree `2k - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeRule {
    kind: RuleKind,
    k: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TimeRule {
    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exactness(&self) -> usize {
        2 * self.k - 1
    }

    /// Applies the rule on the reference interval.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    pub fn map(&self, t_start: f64, t_end: f64) -> Result<MappedRule> {
        map_rule(self, t_start, t_end)
    }
}

/// A rule transported onto a physical interval.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MappedRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::invalid("quadrature index k must be at least 1"));
    }
    if k > MAX_K {
        return Err(Error::invalid(format!(
            "quadrature index k = {k} exceeds the supported maximum {MAX_K}"
        )));
    }
    Ok(())
}

/// Legendre polynomial `P_n` and its first derivative at `x`.
pub(crate) fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for m in 2..=n {
        let m = m as f64;
        let next = ((2.0 * m - 1.0) * x * p - (m - 1.0) * p_prev) / m;
        p_prev = p;
        p = next;
    }
    let nf = n as f64;
    // derivative from the three-term identity; endpoints need the closed form
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        x.signum().powi(n as i32 + 1) * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p - p_prev) / (x * x - 1.0)
    };
    (p, dp)
}

/// Roots of `f` inside `(-1, 1)`: sign changes on a fine grid, bisection, then
/// Newton polishing.
fn interior_roots(
    count: usize,
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let samples = 400 * (count + 1);
    let mut roots = Vec::with_capacity(count);
    let grid = |i: usize| -1.0 + 2.0 * i as f64 / samples as f64;
    let mut a = grid(1);
    let mut fa = f(a);
    for i in 2..samples {
        let b = grid(i);
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm * flo <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
                if hi - lo < 1e-10 {
                    break;
                }
            }
            let mut x = 0.5 * (lo + hi);
            for _ in 0..8 {
                let step = f(x) / df(x);
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            roots.push(x);
        }
        a = b;
        fa = fb;
    }
    debug_assert_eq!(roots.len(), count);
    roots
}

fn symmetrize(nodes: &mut [f64], weights: &mut [f64]) {
    let n = nodes.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
}

/// The `(k + 1)`-point Gauss-Lobatto rule.
pub fn gauss_lobatto_rule(k: usize) -> Result<TimeRule> {
    check_k(k)?;
    let kf = k as f64;
    let mut nodes = vec![-1.0];
    if k >= 2 {
        // interior nodes are the roots of P_k'
        let d2 = |x: f64| {
            let (p, dp) = legendre(k, x);
            (2.0 * x * dp - kf * (kf + 1.0) * p) / (1.0 - x * x)
        };
        nodes.extend(interior_roots(k - 1, |x| legendre(k, x).1, d2));
    }
    nodes.push(1.0);
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let p = legendre(k, x).0;
            2.0 / (kf * (kf + 1.0) * p * p)
        })
        .collect();
    symmetrize(&mut nodes, &mut weights);
    Ok(TimeRule {
        kind: RuleKind::GaussLobatto,
        k,
        nodes,
        weights,
    })
}

/// The `k`-point Gauss-Legendre rule.
pub fn gauss_rule(k: usize) -> Result<TimeRule> {
    check_k(k)?;
    let mut nodes = interior_roots(k, |x| legendre(k, x).0, |x| legendre(k, x).1);
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let dp = legendre(k, x).1;
            2.0 / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    symmetrize(&mut nodes, &mut weights);
    Ok(TimeRule {
        kind: RuleKind::Gauss,
        k,
        nodes,
        weights,
    })
}

pub fn map_rule(rule: &TimeRule, t_start: f64, t_end: f64) -> Result<MappedRule> {
    if !(t_start < t_end) || !t_start.is_finite() || !t_end.is_finite() {
        return Err(Error::invalid(format!(
            "degenerate time interval [{t_start}, {t_end}]"
        )));
    }
    let mid = 0.5 * (t_start + t_end);
    let half = 0.5 * (t_end - t_start);
    Ok(MappedRule {
        nodes: rule.nodes.iter().map(|&t| mid + half * t).collect(),
        weights: rule.weights.iter().map(|&w| half * w).collect(),
    })
}

/// Reference nodes carrying a degree-`degree` polynomial: Gauss-Lobatto points
/// for `degree >= 1`, the midpoint for constants.
fn reference_nodes(degree: usize) -> Result<Vec<f64>> {
    if degree == 0 {
        Ok(vec![0.0])
    } else {
        Ok(gauss_lobatto_rule(degree)?.nodes)
    }
}

fn barycentric_eval(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    // second-form barycentric formula
    let n = nodes.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..n {
        let diff = x - nodes[j];
        if diff == 0.0 {
            return values[j];
        }
        let mut w = 1.0;
        for m in 0..n {
            if m != j {
                w /= nodes[j] - nodes[m];
            }
        }
        let c = w / diff;
        num += c * values[j];
        den += c;
    }
    num / den
}

/// A scalar polynomial on `[t_start, t_end]` given by its values at the
/// Gauss-Lobatto nodes of its degree.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePoly {
    t_start: f64,
    t_end: f64,
    values: Vec<f64>,
}

impl TimePoly {
    pub fn from_nodal_values(t_start: f64, t_end: f64, values: Vec<f64>) -> Result<Self> {
        if !(t_start < t_end) {
            return Err(Error::invalid(format!(
                "degenerate time interval [{t_start}, {t_end}]"
            )));
        }
        if values.is_empty() || values.len() > MAX_K + 1 {
            return Err(Error::invalid(format!(
                "a time polynomial needs between 1 and {} nodal values, got {}",
                MAX_K + 1,
                values.len()
            )));
        }
        Ok(Self {
            t_start,
            t_end,
            values,
        })
    }

    /// Samples `f` at the nodes of a degree-`degree` polynomial.
    pub fn interpolate(
        t_start: f64,
        t_end: f64,
        degree: usize,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if degree > MAX_K {
            return Err(Error::invalid(format!("degree {degree} exceeds {MAX_K}")));
        }
        let nodes = reference_nodes(degree)?;
        let poly = Self::from_nodal_values(t_start, t_end, vec![0.0; nodes.len()])?;
        let values = nodes.iter().map(|&s| f(poly.to_physical(s))).collect();
        Self::from_nodal_values(t_start, t_end, values)
    }

    pub fn degree(&self) -> usize {
        self.values.len() - 1
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    pub fn nodal_values(&self) -> &[f64] {
        &self.values
    }

    /// Physical positions of the nodal values.
    pub fn nodes(&self) -> Vec<f64> {
        reference_nodes(self.degree())
            .expect("degree validated at construction")
            .into_iter()
            .map(|s| self.to_physical(s))
            .collect()
    }

    fn to_physical(&self, s: f64) -> f64 {
        0.5 * (self.t_start + self.t_end) + 0.5 * (self.t_end - self.t_start) * s
    }

    fn to_reference(&self, t: f64) -> f64 {
        (2.0 * t - self.t_start - self.t_end) / (self.t_end - self.t_start)
    }

    /// Evaluates on the closed interval; the endpoint values are the one-sided
    /// limits from inside the slab.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let tol = 1e-12 * (self.t_end - self.t_start).max(self.t_end.abs());
        if t < self.t_start - tol || t > self.t_end + tol {
            return Err(Error::invalid(format!(
                "t = {t} lies outside [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        Ok(self.eval_reference(self.to_reference(t)))
    }

    fn eval_reference(&self, s: f64) -> f64 {
        let nodes = reference_nodes(self.degree()).expect("degree validated at construction");
        barycentric_eval(&nodes, &self.values, s)
    }
}

/// Lagrange interpolation through `k + 1` samples taken at the Gauss-Lobatto
/// nodes of `[t_start, t_end]`, evaluated at `t`.
pub fn lagrange_interpolate(samples: &[f64], t_start: f64, t_end: f64, t: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::invalid(
            "interpolation needs k + 1 >= 2 Gauss-Lobatto samples",
        ));
    }
    TimePoly::from_nodal_values(t_start, t_end, samples.to_vec())?.eval(t)
}

/// Local L2 projection of a polynomial of degree at most `k` onto polynomials
/// of degree `k - 1` on the same interval.
pub fn project_pkm1(poly: &TimePoly, k: usize) -> Result<TimePoly> {
    check_k(k)?;
    if poly.degree() > k {
        return Err(Error::invalid(format!(
            "projection onto P_{} expects degree <= {k}, got {}",
            k - 1,
            poly.degree()
        )));
    }
    // Legendre coefficients c_j = (2j+1)/2 \int_{-1}^{1} w P_j, j < k, with a
    // rule exact for the degree 2k - 1 integrand
    let rule = gauss_rule(k)?;
    let coeffs: Vec<f64> = (0..k)
        .map(|j| {
            let integral = rule.integrate(|s| poly.eval_reference(s) * legendre(j, s).0);
            0.5 * (2 * j + 1) as f64 * integral
        })
        .collect();
    let target = reference_nodes(k - 1)?;
    let values = target
        .iter()
        .map(|&s| {
            coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * legendre(j, s).0)
                .sum()
        })
        .collect();
    TimePoly::from_nodal_values(poly.t_start, poly.t_end, values)
}
