//! Finite-alphabet probability machinery.
//!
//! Every distribution lives on a product of labelled axes drawn from the four
//! variables of the coordination problem: the state `X0`, the informed
//! decision-maker's action `X1`, the observer's action `X2`, and the
//! observer's channel output `Y`. Cells are stored row-major, last axis
//! fastest, so for the full alphabet the flat index is
//! `((x0 * |X1| + x1) * |X2| + x2) * |Y| + y`.
//!
//! All information measures are in bits, with `0 log 0 = 0`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs whose total deviates from one by less than this are renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Var {
    X0,
    X1,
    X2,
    Y,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Var::X0 => "X0",
            Var::X1 => "X1",
            Var::X2 => "X2",
            Var::Y => "Y",
        };
        f.write_str(s)
    }
}

/// Sizes of the four alphabets together with the flat index map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphabetSpec {
    pub x0: usize,
    pub x1: usize,
    pub x2: usize,
    pub y: usize,
}

impl AlphabetSpec {
    pub fn new(x0: usize, x1: usize, x2: usize, y: usize) -> Result<Self> {
        if x0 == 0 || x1 == 0 || x2 == 0 || y == 0 {
            return Err(Error::Argument(format!(
                "alphabet sizes must be positive, got ({x0}, {x1}, {x2}, {y})"
            )));
        }
        Ok(Self { x0, x1, x2, y })
    }

    /// Number of quadruplets `L`.
    pub fn len(&self) -> usize {
        self.x0 * self.x1 * self.x2 * self.y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn size(&self, var: Var) -> usize {
        match var {
            Var::X0 => self.x0,
            Var::X1 => self.x1,
            Var::X2 => self.x2,
            Var::Y => self.y,
        }
    }

    pub fn axes(&self) -> [(Var, usize); 4] {
        [
            (Var::X0, self.x0),
            (Var::X1, self.x1),
            (Var::X2, self.x2),
            (Var::Y, self.y),
        ]
    }

    /// Axes of the action/state product `X0 x X1 x X2`.
    pub fn action_axes(&self) -> [(Var, usize); 3] {
        [(Var::X0, self.x0), (Var::X1, self.x1), (Var::X2, self.x2)]
    }

    pub fn index(&self, x0: usize, x1: usize, x2: usize, y: usize) -> usize {
        debug_assert!(x0 < self.x0 && x1 < self.x1 && x2 < self.x2 && y < self.y);
        ((x0 * self.x1 + x1) * self.x2 + x2) * self.y + y
    }

    pub fn coords(&self, index: usize) -> [usize; 4] {
        debug_assert!(index < self.len());
        let y = index % self.y;
        let rest = index / self.y;
        let x2 = rest % self.x2;
        let rest = rest / self.x2;
        let x1 = rest % self.x1;
        let x0 = rest / self.x1;
        [x0, x1, x2, y]
    }
}

/// Checks a probability vector and renormalizes small accumulation drift.
fn normalized(mut probs: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::NotNormalized(format!("{what}: empty vector")));
    }
    if let Some((i, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        return Err(Error::NotNormalized(format!("{what}: entry {i} is {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > RENORMALIZE_TOL {
        return Err(Error::NotNormalized(format!("{what}: sums to {total}")));
    }
    if total != 1.0 {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    Ok(probs)
}

/// Shannon entropy in bits of a (sub-)probability vector.
pub fn entropy_bits(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// A probability vector over a product of labelled axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    axes: Vec<(Var, usize)>,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(axes: &[(Var, usize)], probs: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Argument("distribution needs at least one axis".into()));
        }
        for (i, (v, n)) in axes.iter().enumerate() {
            if *n == 0 {
                return Err(Error::Argument(format!("axis {v} has size 0")));
            }
            if axes[..i].iter().any(|(u, _)| u == v) {
                return Err(Error::Argument(format!("axis {v} repeated")));
            }
        }
        let len: usize = axes.iter().map(|(_, n)| n).product();
        if probs.len() != len {
            return Err(Error::Alphabet(format!(
                "expected {len} probabilities, got {}",
                probs.len()
            )));
        }
        Ok(Self {
            axes: axes.to_vec(),
            probs: normalized(probs, "joint distribution")?,
        })
    }

    /// Distribution over the full quadruplet alphabet.
    pub fn over(spec: &AlphabetSpec, probs: Vec<f64>) -> Result<Self> {
        Self::new(&spec.axes(), probs)
    }

    /// Distribution over `X0 x X1 x X2`.
    pub fn over_actions(n0: usize, n1: usize, n2: usize, probs: Vec<f64>) -> Result<Self> {
        Self::new(&[(Var::X0, n0), (Var::X1, n1), (Var::X2, n2)], probs)
    }

    pub fn uniform(axes: &[(Var, usize)]) -> Result<Self> {
        let len: usize = axes.iter().map(|(_, n)| n).product();
        Self::new(axes, vec![1.0 / len as f64; len])
    }

    pub fn point_mass(axes: &[(Var, usize)], coords: &[usize]) -> Result<Self> {
        let len: usize = axes.iter().map(|(_, n)| n).product();
        let mut probs = vec![0.0; len];
        let shell = Self {
            axes: axes.to_vec(),
            probs: Vec::new(),
        };
        probs[shell.index_of(coords)?] = 1.0;
        Self::new(axes, probs)
    }

    /// Builds a distribution by evaluating `f` at every cell's coordinates.
    pub fn from_fn<F>(axes: &[(Var, usize)], mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> f64,
    {
        let len: usize = axes.iter().map(|(_, n)| n).product();
        let mut coords = vec![0; axes.len()];
        let mut probs = Vec::with_capacity(len);
        for _ in 0..len {
            probs.push(f(&coords));
            advance(&mut coords, axes);
        }
        Self::new(axes, probs)
    }

    pub fn axes(&self) -> &[(Var, usize)] {
        &self.axes
    }

    pub fn vars(&self) -> Vec<Var> {
        self.axes.iter().map(|(v, _)| *v).collect()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn size_of(&self, var: Var) -> Option<usize> {
        self.axes.iter().find(|(v, _)| *v == var).map(|(_, n)| *n)
    }

    fn axis_position(&self, var: Var) -> Result<usize> {
        self.axes
            .iter()
            .position(|(v, _)| *v == var)
            .ok_or_else(|| Error::Alphabet(format!("distribution has no axis {var}")))
    }

    pub fn index_of(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.axes.len() {
            return Err(Error::Alphabet(format!(
                "expected {} coordinates, got {}",
                self.axes.len(),
                coords.len()
            )));
        }
        let mut index = 0;
        for (&c, (v, n)) in coords.iter().zip(&self.axes) {
            if c >= *n {
                return Err(Error::Alphabet(format!("{v} = {c} out of range 0..{n}")));
            }
            index = index * n + c;
        }
        Ok(index)
    }

    pub fn coords_of(&self, mut index: usize) -> Vec<usize> {
        let mut coords = vec![0; self.axes.len()];
        for (c, (_, n)) in coords.iter_mut().zip(&self.axes).rev() {
            *c = index % n;
            index /= n;
        }
        coords
    }

    pub fn prob(&self, coords: &[usize]) -> Result<f64> {
        Ok(self.probs[self.index_of(coords)?])
    }

    /// Sums out every axis not in `keep`. Output axes follow the order of `keep`.
    pub fn marginal(&self, keep: &[Var]) -> Result<JointDistribution> {
        if keep.is_empty() {
            return Err(Error::Argument("marginal over an empty variable set".into()));
        }
        let positions = keep
            .iter()
            .map(|&v| self.axis_position(v))
            .collect::<Result<Vec<_>>>()?;
        let out_axes: Vec<(Var, usize)> = positions.iter().map(|&p| self.axes[p]).collect();
        for (i, (v, _)) in out_axes.iter().enumerate() {
            if out_axes[..i].iter().any(|(u, _)| u == v) {
                return Err(Error::Argument(format!("variable {v} repeated")));
            }
        }
        let out_len: usize = out_axes.iter().map(|(_, n)| n).product();
        let mut out = vec![0.0; out_len];
        let mut coords = vec![0; self.axes.len()];
        for &p in &self.probs {
            let mut j = 0;
            for (&pos, (_, n)) in positions.iter().zip(&out_axes) {
                j = j * n + coords[pos];
            }
            out[j] += p;
            advance(&mut coords, &self.axes);
        }
        Ok(JointDistribution {
            axes: out_axes,
            probs: out,
        })
    }

    /// Entropy of the marginal on `vars`; zero for an empty set.
    pub fn entropy(&self, vars: &[Var]) -> Result<f64> {
        if vars.is_empty() {
            return Ok(0.0);
        }
        Ok(entropy_bits(self.marginal(vars)?.probs()))
    }

    /// `H(A | C) = H(A, C) - H(C)`.
    pub fn conditional_entropy(&self, a: &[Var], c: &[Var]) -> Result<f64> {
        let ac: Vec<Var> = a.iter().chain(c).copied().collect();
        Ok(self.entropy(&ac)? - self.entropy(c)?)
    }

    /// Convex combination `theta * self + (1 - theta) * other`.
    pub fn mix(&self, other: &JointDistribution, theta: f64) -> Result<JointDistribution> {
        if self.axes != other.axes {
            return Err(Error::Alphabet("cannot mix distributions on different axes".into()));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Argument(format!("mixing weight {theta} outside [0, 1]")));
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| theta * a + (1.0 - theta) * b)
            .collect();
        JointDistribution::new(&self.axes, probs)
    }
}

/// Odometer increment over mixed-radix coordinates, last axis fastest.
fn advance(coords: &mut [usize], axes: &[(Var, usize)]) {
    for (c, (_, n)) in coords.iter_mut().zip(axes).rev() {
        *c += 1;
        if *c < *n {
            return;
        }
        *c = 0;
    }
}

/// Row-stochastic monitoring channel `Gamma(y | x1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationChannel {
    inputs: usize,
    outputs: usize,
    matrix: Vec<f64>,
}

impl ObservationChannel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let inputs = rows.len();
        let outputs = rows.first().map_or(0, Vec::len);
        if inputs == 0 || outputs == 0 {
            return Err(Error::Argument("observation channel must be non-empty".into()));
        }
        let mut matrix = Vec::with_capacity(inputs * outputs);
        for (x1, row) in rows.into_iter().enumerate() {
            if row.len() != outputs {
                return Err(Error::Alphabet(format!(
                    "channel row {x1} has {} entries, expected {outputs}",
                    row.len()
                )));
            }
            matrix.extend(normalized(row, &format!("channel row {x1}"))?);
        }
        Ok(Self {
            inputs,
            outputs,
            matrix,
        })
    }

    /// Noiseless channel `Y = X1`.
    pub fn identity(n: usize) -> Result<Self> {
        Self::new(
            (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    pub fn binary_symmetric(crossover: f64) -> Result<Self> {
        Self::new(vec![
            vec![1.0 - crossover, crossover],
            vec![crossover, 1.0 - crossover],
        ])
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn prob(&self, x1: usize, y: usize) -> f64 {
        self.matrix[x1 * self.outputs + y]
    }

    pub fn row(&self, x1: usize) -> &[f64] {
        &self.matrix[x1 * self.outputs..(x1 + 1) * self.outputs]
    }

    /// `H(Y | X1 = x1)`.
    pub fn row_entropy(&self, x1: usize) -> f64 {
        entropy_bits(self.row(x1))
    }
}

/// Distribution `rho` of the i.i.d. state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatePrior(Vec<f64>);

impl StatePrior {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Ok(Self(normalized(probs, "state prior")?))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.0)
    }
}

/// Joint law `Q(x0,x1,x2,y) = qbar(x0,x1,x2) Gamma(y|x1)`.
pub fn compose(qbar: &JointDistribution, gamma: &ObservationChannel) -> Result<JointDistribution> {
    let (n0, n1, n2) = action_dims(qbar)?;
    if n1 != gamma.inputs() {
        return Err(Error::Alphabet(format!(
            "|X1| = {n1} but channel has {} inputs",
            gamma.inputs()
        )));
    }
    let spec = AlphabetSpec::new(n0, n1, n2, gamma.outputs())?;
    let mut probs = Vec::with_capacity(spec.len());
    for (i, &p) in qbar.probs().iter().enumerate() {
        let x1 = (i / n2) % n1;
        probs.extend(gamma.row(x1).iter().map(|g| p * g));
    }
    // The product preserves the unit sum exactly up to rounding, so skip
    // `new` and its renormalization to keep the y-marginal bit-identical.
    Ok(JointDistribution {
        axes: spec.axes().to_vec(),
        probs,
    })
}

/// Sizes `(|X0|, |X1|, |X2|)` of a distribution over exactly those axes.
pub fn action_dims(qbar: &JointDistribution) -> Result<(usize, usize, usize)> {
    match qbar.axes() {
        [(Var::X0, n0), (Var::X1, n1), (Var::X2, n2)] => Ok((*n0, *n1, *n2)),
        other => Err(Error::Alphabet(format!(
            "expected axes (X0, X1, X2), got {:?}",
            other.iter().map(|(v, _)| *v).collect::<Vec<_>>()
        ))),
    }
}

/// Values below this are entropy round-off and reported as zero information.
pub const INFORMATION_FLOOR: f64 = 1e-12;

/// `I(A; B | C) = H(A,C) + H(B,C) - H(A,B,C) - H(C)`, clamped at zero.
pub fn conditional_mutual_information(
    q: &JointDistribution,
    a: &[Var],
    b: &[Var],
    c: &[Var],
) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("mutual information needs nonempty A and B".into()));
    }
    let overlap = a
        .iter()
        .find(|v| b.contains(v) || c.contains(v))
        .or_else(|| b.iter().find(|v| c.contains(v)));
    if let Some(v) = overlap {
        return Err(Error::Argument(format!("variable {v} appears in two sets")));
    }
    let ac: Vec<Var> = a.iter().chain(c).copied().collect();
    let bc: Vec<Var> = b.iter().chain(c).copied().collect();
    let abc: Vec<Var> = a.iter().chain(b).chain(c).copied().collect();
    let value = q.entropy(&ac)? + q.entropy(&bc)? - q.entropy(&abc)? - q.entropy(c)?;
    Ok(if value < INFORMATION_FLOOR { 0.0 } else { value })
}

pub fn mutual_information(q: &JointDistribution, a: &[Var], b: &[Var]) -> Result<f64> {
    conditional_mutual_information(q, a, b, &[])
}

/// `(1/2) sum |q1 - q2|`.
pub fn total_variation(q1: &JointDistribution, q2: &JointDistribution) -> Result<f64> {
    if q1.axes() != q2.axes() {
        return Err(Error::Alphabet(
            "total variation between distributions on different axes".into(),
        ));
    }
    Ok(0.5
        * q1
            .probs()
            .iter()
            .zip(q2.probs())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes3() -> [(Var, usize); 3] {
        [(Var::X0, 2), (Var::X1, 2), (Var::X2, 2)]
    }

    #[test]
    fn index_map_round_trips() {
        let spec = AlphabetSpec::new(3, 2, 4, 5).unwrap();
        assert_eq!(spec.len(), 120);
        for l in 0..spec.len() {
            let [x0, x1, x2, y] = spec.coords(l);
            assert_eq!(spec.index(x0, x1, x2, y), l);
        }
        assert!(AlphabetSpec::new(0, 1, 1, 1).is_err());
    }

    #[test]
    fn constructor_renormalizes_small_drift_only() {
        let q = JointDistribution::new(&[(Var::X0, 2)], vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(JointDistribution::new(&[(Var::X0, 2)], vec![0.5, 0.51]).is_err());
        assert!(JointDistribution::new(&[(Var::X0, 2)], vec![1.5, -0.5]).is_err());
        assert!(JointDistribution::new(&[(Var::X0, 2)], vec![f64::NAN, 1.0]).is_err());
        assert!(JointDistribution::new(&[(Var::X0, 2)], vec![1.0]).is_err());
    }

    #[test]
    fn compose_with_identity_channel() {
        let qbar = JointDistribution::uniform(&axes3()).unwrap();
        let q = compose(&qbar, &ObservationChannel::identity(2).unwrap()).unwrap();
        let spec = AlphabetSpec::new(2, 2, 2, 2).unwrap();
        for l in 0..spec.len() {
            let [_, x1, _, y] = spec.coords(l);
            let expected = if y == x1 { 0.125 } else { 0.0 };
            assert_eq!(q.probs()[l], expected);
        }
        assert_eq!(q.marginal(&[Var::X0, Var::X1, Var::X2]).unwrap(), qbar);
    }

    #[test]
    fn compose_uniform_row_splits_mass() {
        let qbar = JointDistribution::from_fn(&axes3(), |c| (1 + c[0] + 2 * c[1] + c[2]) as f64 / 24.0)
            .unwrap();
        let gamma = ObservationChannel::new(vec![vec![0.5, 0.5], vec![0.9, 0.1]]).unwrap();
        let q = compose(&qbar, &gamma).unwrap();
        for x0 in 0..2 {
            for x2 in 0..2 {
                let a = q.prob(&[x0, 0, x2, 0]).unwrap();
                let b = q.prob(&[x0, 0, x2, 1]).unwrap();
                assert_eq!(a, b);
                assert_eq!(a + b, qbar.prob(&[x0, 0, x2]).unwrap());
            }
        }
    }

    #[test]
    fn compose_rejects_dimension_mismatch() {
        let qbar = JointDistribution::uniform(&axes3()).unwrap();
        assert!(matches!(
            compose(&qbar, &ObservationChannel::identity(3).unwrap()),
            Err(Error::Alphabet(_))
        ));
        let wrong = JointDistribution::uniform(&[(Var::X1, 2), (Var::X0, 2)]).unwrap();
        assert!(compose(&wrong, &ObservationChannel::identity(2).unwrap()).is_err());
    }

    #[test]
    fn marginals() {
        let u = JointDistribution::uniform(&axes3()).unwrap();
        let m = u.marginal(&[Var::X2]).unwrap();
        assert_eq!(m.probs(), &[0.5, 0.5]);

        let pm = JointDistribution::point_mass(&axes3(), &[1, 0, 1]).unwrap();
        let m = pm.marginal(&[Var::X2, Var::X0]).unwrap();
        assert_eq!(m.axes(), &[(Var::X2, 2), (Var::X0, 2)]);
        assert_eq!(m.prob(&[1, 1]).unwrap(), 1.0);

        assert!(matches!(u.marginal(&[]), Err(Error::Argument(_))));
        assert!(u.marginal(&[Var::Y]).is_err());
    }

    #[test]
    fn entropy_values() {
        let u = JointDistribution::uniform(&[(Var::X1, 2)]).unwrap();
        assert_eq!(u.entropy(&[Var::X1]).unwrap(), 1.0);
        let pm = JointDistribution::point_mass(&axes3(), &[0, 1, 1]).unwrap();
        assert_eq!(pm.entropy(&[Var::X0, Var::X1, Var::X2]).unwrap(), 0.0);
        // 2 - (3/4) log2 3, evaluated independently.
        let rho = StatePrior::new(vec![0.25, 0.75]).unwrap();
        assert!((rho.entropy() - 0.811_278_124_459_132_9).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_edge_cases() {
        let u = JointDistribution::uniform(&axes3()).unwrap();
        assert_eq!(mutual_information(&u, &[Var::X0], &[Var::X1]).unwrap(), 0.0);

        let q = compose(&u, &ObservationChannel::identity(2).unwrap()).unwrap();
        let i = conditional_mutual_information(&q, &[Var::X1], &[Var::Y], &[Var::X0, Var::X2])
            .unwrap();
        assert!((i - 1.0).abs() < 1e-12);

        assert!(matches!(
            conditional_mutual_information(&q, &[Var::X1], &[Var::X1], &[]),
            Err(Error::Argument(_))
        ));
        assert!(conditional_mutual_information(&q, &[Var::X1], &[Var::Y], &[Var::Y]).is_err());
    }

    #[test]
    fn total_variation_values() {
        let axes = [(Var::X0, 4)];
        let u = JointDistribution::uniform(&axes).unwrap();
        let p = JointDistribution::point_mass(&axes, &[0]).unwrap();
        let r = JointDistribution::point_mass(&axes, &[3]).unwrap();
        assert_eq!(total_variation(&u, &u).unwrap(), 0.0);
        assert_eq!(total_variation(&p, &r).unwrap(), 1.0);
        assert_eq!(total_variation(&u, &p).unwrap(), 0.75);
        let other = JointDistribution::uniform(&[(Var::X1, 4)]).unwrap();
        assert!(total_variation(&u, &other).is_err());
    }

    #[test]
    fn channel_validation() {
        assert!(ObservationChannel::new(vec![vec![0.7, 0.2]]).is_err());
        assert!(ObservationChannel::new(vec![vec![1.0], vec![0.5, 0.5]]).is_err());
        let bsc = ObservationChannel::binary_symmetric(0.11).unwrap();
        assert!((bsc.row_entropy(0) - bsc.row_entropy(1)).abs() < 1e-15);
        assert_eq!(ObservationChannel::identity(2).unwrap().row_entropy(1), 0.0);
    }
}
