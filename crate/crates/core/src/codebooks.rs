//! Codebooks, nearest-neighbour decoding and the per-round symbol error rate.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng, Vector};

const MODULUS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerConstraint {
    /// `‖x‖₂ ≤ γ_X` for every codeword.
    Power(f64),
    /// `‖x‖₂ = γ_X` for every codeword.
    ConstantModulus(f64),
}

impl PowerConstraint {
    pub fn gamma_x(&self) -> f64 {
        match *self {
            Self::Power(g) | Self::ConstantModulus(g) => g,
        }
    }

    fn admits(&self, x: &Vector) -> bool {
        let norm = x.norm();
        match *self {
            Self::Power(g) => norm <= g * (1.0 + 1e-12),
            Self::ConstantModulus(g) => (norm - g).abs() <= MODULUS_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    codewords: Vec<Vector>,
    constraint: PowerConstraint,
}

impl Codebook {
    pub fn new(codewords: Vec<Vector>, constraint: PowerConstraint) -> Result<Self> {
        let Some(first) = codewords.first() else {
            return Err(Error::invalid("codebook needs at least one codeword"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::invalid("codeword dimension must be at least 1"));
        }
        let gamma = constraint.gamma_x();
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("γ_X must be positive, got {gamma}")));
        }
        for (j, x) in codewords.iter().enumerate() {
            Error::check_dim(dim, x.len())?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("codeword {j} is not finite")));
            }
            if !constraint.admits(x) {
                return Err(Error::invalid(format!(
                    "codeword {j} has norm {} which violates {constraint:?}",
                    x.norm()
                )));
            }
        }
        for i in 0..codewords.len() {
            for j in i + 1..codewords.len() {
                if codewords[i] == codewords[j] {
                    return Err(Error::invalid(format!("codewords {i} and {j} coincide")));
                }
            }
        }
        Ok(Self {
            codewords,
            constraint,
        })
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.codewords[0].len()
    }

    pub fn codewords(&self) -> &[Vector] {
        &self.codewords
    }

    pub fn constraint(&self) -> PowerConstraint {
        self.constraint
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CodebookDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CodebookDocument = serde_json::from_str(text)?;
        doc.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ConstraintTag {
    Power,
    ConstantModulus,
}

/// On-disk form: `{M, d, gamma_x, constraint, codewords}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookDocument {
    #[serde(rename = "M")]
    m: usize,
    d: usize,
    gamma_x: f64,
    constraint: ConstraintTag,
    codewords: Vec<Vec<f64>>,
}

impl From<&Codebook> for CodebookDocument {
    fn from(cb: &Codebook) -> Self {
        let (constraint, gamma_x) = match cb.constraint {
            PowerConstraint::Power(g) => (ConstraintTag::Power, g),
            PowerConstraint::ConstantModulus(g) => (ConstraintTag::ConstantModulus, g),
        };
        Self {
            m: cb.len(),
            d: cb.dim(),
            gamma_x,
            constraint,
            codewords: cb.codewords.iter().map(|x| x.iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<CodebookDocument> for Codebook {
    type Error = Error;

    fn try_from(doc: CodebookDocument) -> Result<Self> {
        Error::check_dim(doc.m, doc.codewords.len())?;
        let codewords = doc
            .codewords
            .into_iter()
            .map(|row| {
                Error::check_dim(doc.d, row.len())?;
                Ok(Vector::from_vec(row))
            })
            .collect::<Result<Vec<_>>>()?;
        let constraint = match doc.constraint {
            ConstraintTag::Power => PowerConstraint::Power(doc.gamma_x),
            ConstraintTag::ConstantModulus => PowerConstraint::ConstantModulus(doc.gamma_x),
        };
        Codebook::new(codewords, constraint)
    }
}

/// Indexed family of codebooks sharing `M` and `d`.
#[derive(Debug, Clone)]
pub struct SuperCodebook {
    codebooks: Vec<Codebook>,
}

impl SuperCodebook {
    pub fn new(codebooks: Vec<Codebook>) -> Result<Self> {
        let Some(first) = codebooks.first() else {
            return Err(Error::invalid("super-codebook needs at least one codebook"));
        };
        let (m, d) = (first.len(), first.dim());
        for cb in &codebooks[1..] {
            Error::check_dim(m, cb.len())?;
            Error::check_dim(d, cb.dim())?;
        }
        Ok(Self { codebooks })
    }

    pub fn len(&self) -> usize {
        self.codebooks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codebooks.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Codebook> {
        self.codebooks.get(i)
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }
}

impl std::ops::Index<usize> for SuperCodebook {
    type Output = Codebook;

    fn index(&self, i: usize) -> &Codebook {
        &self.codebooks[i]
    }
}

/// `M` codewords with standard-normal directions scaled to norm `γ_X`.
pub fn make_constant_modulus_codebook(
    m: usize,
    d: usize,
    gamma_x: f64,
    rng: &mut Rng,
) -> Result<Codebook> {
    if m < 2 {
        return Err(Error::invalid(format!("codebook needs M ≥ 2 codewords, got {m}")));
    }
    if d == 0 {
        return Err(Error::invalid("codeword dimension must be at least 1"));
    }
    if d == 1 && m > 2 {
        return Err(Error::invalid(format!(
            "only two constant-modulus codewords exist in one dimension, got M = {m}"
        )));
    }
    let mut codewords: Vec<Vector> = Vec::with_capacity(m);
    while codewords.len() < m {
        let x = rng.normal_vector(d);
        let norm = x.norm();
        if norm == 0.0 {
            continue;
        }
        let x = x * (gamma_x / norm);
        if codewords.iter().all(|c| c != &x) {
            codewords.push(x);
        }
    }
    Codebook::new(codewords, PowerConstraint::ConstantModulus(gamma_x))
}

/// `N` codebooks whose entries are i.i.d. uniform on `(−γ_X/√d, γ_X/√d)`, so
/// every codeword satisfies `‖x‖₂ ≤ γ_X`.
pub fn generate_super_codebook(
    n: usize,
    m: usize,
    d: usize,
    gamma_x: f64,
    rng: &mut Rng,
) -> Result<SuperCodebook> {
    if n == 0 {
        return Err(Error::invalid("super-codebook needs N ≥ 1"));
    }
    if m == 0 || d == 0 {
        return Err(Error::invalid("codebooks need M ≥ 1 and d ≥ 1"));
    }
    let half_width = gamma_x / (d as f64).sqrt();
    let mut codebooks = Vec::with_capacity(n);
    for _ in 0..n {
        let mut codewords: Vec<Vector> = Vec::with_capacity(m);
        while codewords.len() < m {
            let x = Vector::from_fn(d, |_, _| {
                let mut v;
                loop {
                    v = rng.uniform_range(-half_width, half_width);
                    if v > -half_width {
                        break;
                    }
                }
                v
            });
            if codewords.iter().all(|c| c != &x) {
                codewords.push(x);
            }
        }
        codebooks.push(Codebook::new(codewords, PowerConstraint::Power(gamma_x))?);
    }
    SuperCodebook::new(codebooks)
}

fn apply_kernel(kernel: Option<&Matrix>, y: &Vector) -> Result<Vector> {
    match kernel {
        None => Ok(y.clone()),
        Some(g) => {
            Error::check_dim(y.len(), g.ncols())?;
            Error::check_dim(y.len(), g.nrows())?;
            Ok(g * y)
        }
    }
}

/// Index of the codeword nearest to `G·y` (`G = I` when `kernel` is `None`),
/// smallest index on ties.
pub fn nn_decode(cb: &Codebook, y: &Vector, kernel: Option<&Matrix>) -> Result<usize> {
    Error::check_dim(cb.dim(), y.len())?;
    let z = apply_kernel(kernel, y)?;
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (j, x) in cb.codewords().iter().enumerate() {
        let dist = (x - &z).norm_squared();
        if dist < best_dist {
            best = j;
            best_dist = dist;
        }
    }
    Ok(best)
}

/// Fraction of training codewords whose nearest competitor is strictly
/// closer to `G·y^j` than the transmitted codeword. Ties count as correct.
pub fn symbol_error_rate(cb: &Codebook, kernel: Option<&Matrix>, ys: &[Vector]) -> Result<f64> {
    let m = cb.len();
    Error::check_dim(m, ys.len())?;
    let mut errors = 0usize;
    for (j, y) in ys.iter().enumerate() {
        Error::check_dim(cb.dim(), y.len())?;
        let z = apply_kernel(kernel, y)?;
        let own = (&cb.codewords[j] - &z).norm_squared();
        let competitor = cb
            .codewords
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, x)| (x - &z).norm_squared())
            .fold(f64::INFINITY, f64::min);
        if competitor < own {
            errors += 1;
        }
    }
    Ok(errors as f64 / m as f64)
}

/// Empirical symbol error rate of decoder kernel `g` on one round's outputs.
pub fn ser_decoder(cb: &Codebook, g: &Matrix, ys: &[Vector]) -> Result<f64> {
    symbol_error_rate(cb, Some(g), ys)
}

/// Empirical symbol error rate of a codebook over an additive-noise round.
pub fn ser_codebook(cb: &Codebook, ys: &[Vector]) -> Result<f64> {
    symbol_error_rate(cb, None, ys)
}

/// `max_{i≠j} ‖x^i − x^j‖₂`; zero for a single-codeword book.
pub fn max_pairwise_distance(cb: &Codebook) -> f64 {
    let xs = cb.codewords();
    let mut best: f64 = 0.0;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            best = best.max((&xs[i] - &xs[j]).norm());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use crate::numerics::Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn antipodal() -> Codebook {
        Codebook::new(
            vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0])],
            PowerConstraint::ConstantModulus(1.0),
        )
        .unwrap()
    }

    #[test]
    fn constant_modulus_codebooks() {
        let mut rng = Rng::seeded(1);
        let cb = make_constant_modulus_codebook(2, 2, 1.0, &mut rng).unwrap();
        for x in cb.codewords() {
            assert!((x.norm() - 1.0).abs() <= 1e-9);
        }
        let big = make_constant_modulus_codebook(64, 8, 1.0, &mut rng).unwrap();
        assert_eq!(big.len(), 64);
        assert!(max_pairwise_distance(&big) <= 2.0 + 1e-12);

        let a = make_constant_modulus_codebook(16, 8, 1.0, &mut Rng::seeded(9)).unwrap();
        let b = make_constant_modulus_codebook(16, 8, 1.0, &mut Rng::seeded(9)).unwrap();
        assert_eq!(a, b);

        assert!(matches!(
            make_constant_modulus_codebook(1, 8, 1.0, &mut rng),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn super_codebook_power_constraint() {
        let mut rng = Rng::seeded(2);
        let sc = generate_super_codebook(100, 16, 8, 1.0, &mut rng).unwrap();
        assert_eq!(sc.len(), 100);
        let half = 1.0 / 8f64.sqrt();
        for cb in sc.codebooks() {
            assert_eq!((cb.len(), cb.dim()), (16, 8));
            for x in cb.codewords() {
                assert!(x.norm() <= 1.0);
                assert!(x.iter().all(|&e| e > -half && e < half));
            }
        }
        let single = generate_super_codebook(1, 4, 2, 1.0, &mut rng).unwrap();
        assert_eq!(single.len(), 1);
        assert!(generate_super_codebook(0, 4, 2, 1.0, &mut rng).is_err());
    }

    #[test]
    fn codebook_validation() {
        assert!(Codebook::new(vec![], PowerConstraint::Power(1.0)).is_err());
        assert!(Codebook::new(vec![v(&[2.0, 0.0])], PowerConstraint::Power(1.0)).is_err());
        assert!(Codebook::new(
            vec![v(&[0.5, 0.0]), v(&[0.5, 0.0])],
            PowerConstraint::Power(1.0)
        )
        .is_err());
        assert!(Codebook::new(
            vec![v(&[0.5, 0.0]), v(&[0.5])],
            PowerConstraint::Power(1.0)
        )
        .is_err());
    }

    fn axes() -> Codebook {
        Codebook::new(
            vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[-1.0, 0.0]), v(&[0.0, -1.0])],
            PowerConstraint::ConstantModulus(1.0),
        )
        .unwrap()
    }

    fn y2() -> Vector {
        v(&[0.3, -2.0])
    }

    #[test]
    fn one_dimensional_constant_modulus_limit() {
        let mut rng = Rng::seeded(2);
        assert_eq!(make_constant_modulus_codebook(2, 1, 1.0, &mut rng).unwrap().len(), 2);
        assert!(make_constant_modulus_codebook(3, 1, 1.0, &mut rng).is_err());
    }

    #[test]
    fn decode_examples() {
        let mut rng = Rng::seeded(3);
        let cb = make_constant_modulus_codebook(8, 4, 1.0, &mut rng).unwrap();
        let y = cb.codewords()[3].clone();
        assert_eq!(nn_decode(&cb, &y, Some(&Matrix::identity(4, 4))).unwrap(), 3);
        assert_eq!(nn_decode(&cb, &y, None).unwrap(), 3);

        // Zero kernel: argmin ‖x^j‖, exactly tied here, so the first index.
        assert_eq!(nn_decode(&axes(), &y2(), Some(&Matrix::zeros(2, 2))).unwrap(), 0);
        let mixed = Codebook::new(
            vec![v(&[0.9, 0.0]), v(&[0.0, 0.5]), v(&[0.5, 0.0])],
            PowerConstraint::Power(1.0),
        )
        .unwrap();
        assert_eq!(nn_decode(&mixed, &v(&[3.0, 3.0]), Some(&Matrix::zeros(2, 2))).unwrap(), 1);

        assert_eq!(nn_decode(&antipodal(), &v(&[0.2, 5.0]), None).unwrap(), 0);
        assert!(nn_decode(&antipodal(), &v(&[0.2]), None).is_err());
        assert!(nn_decode(&antipodal(), &v(&[0.2, 5.0]), Some(&Matrix::identity(3, 3))).is_err());
    }

    #[test]
    fn decoder_ser_examples() {
        let mut rng = Rng::seeded(4);
        let cb = make_constant_modulus_codebook(16, 8, 1.0, &mut rng).unwrap();
        let ys: Vec<Vector> = cb.codewords().to_vec();
        assert_eq!(ser_decoder(&cb, &Matrix::identity(8, 8), &ys).unwrap(), 0.0);
        // Zero kernel maps every output to the origin; all distances tie.
        let ys: Vec<Vector> = axes().codewords().to_vec();
        assert_eq!(ser_decoder(&axes(), &Matrix::zeros(2, 2), &ys).unwrap(), 0.0);

        let ys = vec![v(&[-0.1, 0.0]), v(&[-1.0, 0.0])];
        assert_eq!(ser_decoder(&antipodal(), &Matrix::identity(2, 2), &ys).unwrap(), 0.5);
        assert!(ser_decoder(&antipodal(), &Matrix::identity(2, 2), &ys[..1]).is_err());
    }

    #[test]
    fn codebook_ser_examples() {
        let cb = antipodal();
        let clean: Vec<Vector> = cb.codewords().to_vec();
        assert_eq!(ser_codebook(&cb, &clean).unwrap(), 0.0);

        // Shift by half the codeword distance: each output is equidistant.
        let z = v(&[-1.0, 0.0]);
        let ys: Vec<Vector> = cb.codewords().iter().map(|x| x + &z).collect();
        assert_eq!(ser_codebook(&cb, &ys).unwrap(), 0.0);

        let z = v(&[-1.5, 0.0]);
        let ys: Vec<Vector> = cb.codewords().iter().map(|x| x + &z).collect();
        assert_eq!(ser_codebook(&cb, &ys).unwrap(), 0.5);
    }

    #[test]
    fn pairwise_distance_examples() {
        assert_relative_eq!(max_pairwise_distance(&antipodal()), 2.0);
        let three = Codebook::new(
            vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[-1.0, 0.0])],
            PowerConstraint::ConstantModulus(1.0),
        )
        .unwrap();
        assert_relative_eq!(max_pairwise_distance(&three), 2.0);
    }

    #[test]
    fn json_round_trip_and_strictness() {
        let mut rng = Rng::seeded(5);
        let cb = make_constant_modulus_codebook(4, 3, 1.0, &mut rng).unwrap();
        let text = cb.to_json().unwrap();
        assert!(text.contains("\"constant_modulus\""));
        assert!(text.contains("\"M\": 4"));
        assert_eq!(Codebook::from_json(&text).unwrap(), cb);

        let bad = r#"{"M": 2, "d": 1, "gamma_x": 1.0, "constraint": "power",
                      "codewords": [[0.5], [-0.5]], "extra": 1}"#;
        assert!(Codebook::from_json(bad).is_err());
        let wrong_count = r#"{"M": 3, "d": 1, "gamma_x": 1.0, "constraint": "power",
                      "codewords": [[0.5], [-0.5]]}"#;
        assert!(Codebook::from_json(wrong_count).is_err());
    }

    proptest! {
        #[test]
        fn ser_is_multiple_of_one_over_m_and_scale_invariant(
            seed in 0u64..1000,
            scale in 0.1f64..10.0,
        ) {
            let mut rng = Rng::seeded(seed);
            let cb = make_constant_modulus_codebook(8, 3, 1.0, &mut rng).unwrap();
            let g = rng.normal_matrix(3, 3);
            let ys: Vec<Vector> = (0..8).map(|_| rng.normal_vector(3)).collect();
            let ser = ser_decoder(&cb, &g, &ys).unwrap();
            prop_assert!((0.0..=1.0).contains(&ser));
            prop_assert!(((ser * 8.0) - (ser * 8.0).round()).abs() < 1e-12);

            // Scaling outputs and codewords together scales all distances.
            let scaled = Codebook::new(
                cb.codewords().iter().map(|x| x * scale).collect(),
                PowerConstraint::ConstantModulus(scale),
            ).unwrap();
            let scaled_ys: Vec<Vector> = ys.iter().map(|y| y * scale).collect();
            for y in &ys {
                let a = nn_decode(&cb, y, Some(&g)).unwrap();
                let b = nn_decode(&scaled, &(y * scale), Some(&g)).unwrap();
                prop_assert_eq!(a, b);
            }
            prop_assert_eq!(ser, ser_decoder(&scaled, &g, &scaled_ys).unwrap());
        }
    }
}
