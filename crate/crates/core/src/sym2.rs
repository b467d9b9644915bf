//! Decomposition of the space of quadrics `W = Sym^2 V` into Heisenberg
//! modules, the three central involutions at even level, and the resulting
//! base/harmonic splits.
//!
//! For odd level n the space splits into `(n+1)/2` isomorphic n-dimensional
//! modules `W_l` spanned by the monomials with index difference l. For even
//! level `n = 2d` there are four pairwise non-isomorphic families
//! `W_0^+, W_0^-, W_1^+, W_1^-`, each a sum of d-dimensional irreducible
//! modules
//!
//! ```text
//! W_{l,m}^s = < x_{j+m} x_j + s * x_{j+m+d} x_{j+d} : j in Z_n >,
//! ```
//!
//! with offset `m = 0..=d`, parity `l = m mod 2`, and the minus family absent
//! at offset d. The component bases are pairwise orthogonal coefficient
//! vectors over the fixed monomial order, so projections reduce to exact
//! coordinate arithmetic.

use crate::cyclotomic::Cyc;
use crate::exact::{exact_rank, SpanBuilder};
use crate::heisenberg::{QuadMonomials, SchrodingerRep, Sign};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum Sym2Error {
    #[error("level must be at least 2, got {0}")]
    LevelTooSmall(u32),
    #[error("involutions require an even level, got {0}")]
    OddLevel(u32),
    #[error("coefficient vector has {got} entries, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error(
        "space is not compatible with the family grading: projections sum to {sum}, dimension is {dim}"
    )]
    NotGraded { sum: usize, dim: usize },
}

/// Label of one irreducible summand of `Sym^2 V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentTag {
    /// `W_l` at odd level.
    Odd { l: u32 },
    /// `W_{l,m}^sign` at even level.
    Even { l: u32, m: u32, sign: Sign },
}

impl ComponentTag {
    pub fn name(&self) -> String {
        match self {
            ComponentTag::Odd { l } => format!("W_{l}"),
            ComponentTag::Even { l, m, sign } => format!("W_{{{l},{m}}}^{}", sign.symbol()),
        }
    }
}

/// One irreducible component with its explicit basis of quadratic forms,
/// coefficients over the fixed monomial order.
#[derive(Debug, Clone)]
pub struct SymComponent {
    pub tag: ComponentTag,
    pub basis: Vec<Vec<Cyc>>,
}

impl SymComponent {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Index of the family this component belongs to, in the fixed family
    /// order: even level `[W_0^+, W_0^-, W_1^+, W_1^-]`, odd level `[W_l]`.
    pub fn family_index(&self) -> usize {
        match self.tag {
            ComponentTag::Odd { l } => l as usize,
            ComponentTag::Even { l, sign, .. } => {
                2 * l as usize
                    + match sign {
                        Sign::Plus => 0,
                        Sign::Minus => 1,
                    }
            }
        }
    }
}

/// Number of component families: 4 at even level, `(n+1)/2` at odd level.
pub fn family_count(n: u32) -> usize {
    if n.is_multiple_of(2) {
        4
    } else {
        n.div_ceil(2) as usize
    }
}

pub fn family_name(n: u32, index: usize) -> String {
    if n.is_multiple_of(2) {
        let l = index / 2;
        let sign = if index.is_multiple_of(2) { '+' } else { '-' };
        format!("W_{l}^{sign}")
    } else {
        format!("W_{index}")
    }
}

/// Explicit decomposition of `Sym^2 V` into irreducible Heisenberg modules.
pub fn decompose(n: u32) -> Result<Vec<SymComponent>, Sym2Error> {
    let rep = SchrodingerRep::new(n).map_err(|_| Sym2Error::LevelTooSmall(n))?;
    let order = rep.cyc_order();
    let mons = QuadMonomials::new(n);
    let mut out = vec![];

    if n % 2 == 1 {
        for l in 0..n.div_ceil(2) {
            let basis = (0..n)
                .map(|j| {
                    let mut v = vec![Cyc::zero(order); mons.dim()];
                    v[mons.index(j as i64 + l as i64, j as i64)] = Cyc::one(order);
                    v
                })
                .collect();
            out.push(SymComponent {
                tag: ComponentTag::Odd { l },
                basis,
            });
        }
    } else {
        let d = n / 2;
        for m in 0..=d {
            let l = m % 2;
            for sign in [Sign::Plus, Sign::Minus] {
                if m == d && sign == Sign::Minus {
                    // x_{j+d} x_j - x_{j+2d} x_{j+d} collapses to zero.
                    continue;
                }
                let basis = (0..d)
                    .map(|j| {
                        let mut v = vec![Cyc::zero(order); mons.dim()];
                        let a = mons.index(j as i64 + m as i64, j as i64);
                        v[a] = &v[a] + &Cyc::one(order);
                        if m < d {
                            let b =
                                mons.index(j as i64 + m as i64 + d as i64, j as i64 + d as i64);
                            v[b] = &v[b] + &Cyc::integer(order, sign.factor());
                        }
                        v
                    })
                    .collect();
                out.push(SymComponent {
                    tag: ComponentTag::Even { l, m, sign },
                    basis,
                });
            }
        }
        let counted = family_multiplicities_from(&out);
        assert_eq!(
            counted,
            theorem_multiplicities(n),
            "component inventory disagrees with the decomposition theorem at n = {n}"
        );
    }
    Ok(out)
}

fn family_multiplicities_from(components: &[SymComponent]) -> [u32; 4] {
    let mut mult = [0u32; 4];
    for c in components {
        if let ComponentTag::Even { .. } = c.tag {
            mult[c.family_index()] += 1;
        }
    }
    mult
}

/// Family multiplicities counted from the explicit component inventory.
pub fn family_multiplicities(n: u32) -> Result<[u32; 4], Sym2Error> {
    if !n.is_multiple_of(2) {
        return Err(Sym2Error::OddLevel(n));
    }
    Ok(family_multiplicities_from(&decompose(n)?))
}

/// Family multiplicities from the decomposition theorem's case split on the
/// parity of `d = n/2`: `((d+1)/2, (d+1)/2, (d+1)/2, (d-1)/2)` for odd d and
/// `((d+2)/2, d/2, d/2, d/2)` for even d.
pub fn theorem_multiplicities(n: u32) -> [u32; 4] {
    assert_eq!(n % 2, 0);
    let d = n / 2;
    if d % 2 == 1 {
        [d.div_ceil(2), d.div_ceil(2), d.div_ceil(2), (d - 1) / 2]
    } else {
        [(d + 2) / 2, d / 2, d / 2, d / 2]
    }
}

/// Dimension of each family, in the fixed family order.
pub fn family_dimensions(n: u32) -> Result<Vec<usize>, Sym2Error> {
    let comps = decompose(n)?;
    let mut dims = vec![0usize; family_count(n)];
    for c in &comps {
        dims[c.family_index()] += c.dim();
    }
    Ok(dims)
}

/// All basis vectors of one family (union over offsets m).
pub fn family_basis(n: u32, family: usize) -> Result<Vec<Vec<Cyc>>, Sym2Error> {
    let comps = decompose(n)?;
    Ok(comps
        .into_iter()
        .filter(|c| c.family_index() == family)
        .flat_map(|c| c.basis)
        .collect())
}

/// Orthonormal numerical bases of the families, rows over the monomial order.
///
/// The exact bases are pairwise orthogonal with squared norms 1 or 2, so
/// orthonormalization is a per-vector scaling.
pub fn family_bases_numeric(n: u32) -> Result<Vec<DMatrix<Complex64>>, Sym2Error> {
    let mons = QuadMonomials::new(n);
    let mut out = vec![];
    for f in 0..family_count(n) {
        let basis = family_basis(n, f)?;
        let mut m = DMatrix::<Complex64>::zeros(basis.len(), mons.dim());
        for (r, v) in basis.iter().enumerate() {
            let norm2: f64 = v.iter().map(|c| c.eval().norm_sqr()).sum();
            let scale = 1.0 / norm2.sqrt();
            for (k, c) in v.iter().enumerate() {
                if !c.is_zero() {
                    m[(r, k)] = c.eval() * scale;
                }
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// Label of one of the three order-two central classes at even level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TorsionLabel {
    /// `sigma^d`
    SigmaD,
    /// `tau^d`
    TauD,
    /// `sigma^d tau^d`
    SigmaTauD,
}

impl TorsionLabel {
    pub const ALL: [TorsionLabel; 3] = [
        TorsionLabel::SigmaD,
        TorsionLabel::TauD,
        TorsionLabel::SigmaTauD,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TorsionLabel::SigmaD => "sigma_d",
            TorsionLabel::TauD => "tau_d",
            TorsionLabel::SigmaTauD => "sigma_tau_d",
        }
    }
}

/// The eigen-coordinate data of one involution on `P(V)` together with the
/// induced base/harmonic split of `W`.
///
/// The base space consists of the mixed products of the two d-dimensional
/// eigenspaces of the underlying linear map (quadrics vanishing on both fixed
/// spaces, dimension `d^2`); the harmonic space of the same-eigenspace
/// products (quadrics for which the fixed spaces are polar, dimension
/// `d(d+1)`). For `sigma^d tau^d` with d odd the map squares to `-1` and the
/// eigenvalues are `+-i`; the induced split of `W` is still by honest
/// eigenvalues `+-1`.
#[derive(Debug, Clone)]
pub struct InvolutionSplit {
    pub label: TorsionLabel,
    pub d: u32,
    /// Eigenbasis of V for the first eigenvalue (+1, or +i when d is odd and
    /// the label is `sigma^d tau^d`).
    pub plus_vectors: Vec<Vec<Cyc>>,
    pub minus_vectors: Vec<Vec<Cyc>>,
    /// Mixed products, dimension `d^2`.
    pub base: Vec<Vec<Cyc>>,
    /// Same-eigenspace products, dimension `d(d+1)`.
    pub harmonic: Vec<Vec<Cyc>>,
    /// Indices (family order) of the two families spanning the base space.
    pub base_families: [usize; 2],
    pub harmonic_families: [usize; 2],
}

/// Eigen-decomposition of V and base/harmonic split of W for one central
/// involution at even level.
pub fn involution_split(n: u32, label: TorsionLabel) -> Result<InvolutionSplit, Sym2Error> {
    let rep = SchrodingerRep::new(n).map_err(|_| Sym2Error::LevelTooSmall(n))?;
    if !n.is_multiple_of(2) {
        return Err(Sym2Error::OddLevel(n));
    }
    let d = n / 2;
    let order = rep.cyc_order();
    let nn = n as usize;
    let unit = |j: usize, c: Cyc| {
        let mut v = vec![Cyc::zero(order); nn];
        v[j % nn] = c;
        v
    };
    let two_term = |j: usize, c: Cyc| {
        let mut v = vec![Cyc::zero(order); nn];
        v[j % nn] = Cyc::one(order);
        v[(j + d as usize) % nn] = c;
        v
    };

    let (plus_vectors, minus_vectors): (Vec<_>, Vec<_>) = match label {
        TorsionLabel::SigmaD => (
            (0..d as usize)
                .map(|j| two_term(j, Cyc::one(order)))
                .collect(),
            (0..d as usize)
                .map(|j| two_term(j, Cyc::integer(order, -1)))
                .collect(),
        ),
        TorsionLabel::TauD => (
            (0..nn)
                .step_by(2)
                .map(|j| unit(j, Cyc::one(order)))
                .collect(),
            (1..nn)
                .step_by(2)
                .map(|j| unit(j, Cyc::one(order)))
                .collect(),
        ),
        TorsionLabel::SigmaTauD => {
            if d.is_multiple_of(2) {
                // (sigma^d tau^d)(x_j) = (-1)^j x_{j+d}; eigenvectors
                // x_j +- x_{j+d} with eigenvalue +-(-1)^j.
                let plus = (0..d as usize)
                    .map(|j| {
                        let c = Cyc::integer(order, if j % 2 == 0 { 1 } else { -1 });
                        two_term(j, c)
                    })
                    .collect();
                let minus = (0..d as usize)
                    .map(|j| {
                        let c = Cyc::integer(order, if j % 2 == 0 { -1 } else { 1 });
                        two_term(j, c)
                    })
                    .collect();
                (plus, minus)
            } else {
                // d odd: the map squares to -1; eigenvalues +-i, and
                // x_j + c x_{j+d} is an eigenvector iff c^2 = -1.
                let i_root = Cyc::root(order, order as i64 / 4);
                let plus = (0..d as usize)
                    .map(|j| {
                        let c = if j % 2 == 1 { i_root.clone() } else { -&i_root };
                        two_term(j, c)
                    })
                    .collect();
                let minus = (0..d as usize)
                    .map(|j| {
                        let c = if j % 2 == 1 { -&i_root } else { i_root.clone() };
                        two_term(j, c)
                    })
                    .collect();
                (plus, minus)
            }
        }
    };

    let mons = QuadMonomials::new(n);
    let mut base = vec![];
    for p in &plus_vectors {
        for m in &minus_vectors {
            base.push(sym_product(p, m, &mons, order));
        }
    }
    let mut harmonic = vec![];
    for set in [&plus_vectors, &minus_vectors] {
        for a in 0..set.len() {
            for b in a..set.len() {
                harmonic.push(sym_product(&set[a], &set[b], &mons, order));
            }
        }
    }

    let d_us = d as usize;
    debug_assert_eq!(base.len(), d_us * d_us);
    debug_assert_eq!(harmonic.len(), d_us * (d_us + 1));

    // Which pair of families each summand carries; family order
    // [W_0^+, W_0^-, W_1^+, W_1^-].
    let (base_families, harmonic_families) = match label {
        TorsionLabel::SigmaD => ([1, 3], [0, 2]),
        TorsionLabel::TauD => ([2, 3], [0, 1]),
        TorsionLabel::SigmaTauD => {
            if d % 2 == 1 {
                ([0, 3], [1, 2])
            } else {
                ([1, 2], [0, 3])
            }
        }
    };

    Ok(InvolutionSplit {
        label,
        d,
        plus_vectors,
        minus_vectors,
        base,
        harmonic,
        base_families,
        harmonic_families,
    })
}

/// Symmetric product of two vectors of V as a quadric coefficient vector.
fn sym_product(u: &[Cyc], v: &[Cyc], mons: &QuadMonomials, order: u32) -> Vec<Cyc> {
    let mut q = vec![Cyc::zero(order); mons.dim()];
    for (k, a) in u.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (l, b) in v.iter().enumerate() {
            if !b.is_zero() {
                let idx = mons.index(k as i64, l as i64);
                q[idx] += &(a * b);
            }
        }
    }
    q
}

/// Exact projection dimensions of a space onto each component family.
///
/// The families are pairwise orthogonal and jointly span W, so the orthogonal
/// projections are exact rational combinations of the family bases. At even
/// level the four families are pairwise non-isomorphic, hence a Heisenberg-
/// invariant space is graded and the dimensions must sum to the dimension of
/// the space; a mismatch is reported as `NotGraded`. At odd level all
/// families are isomorphic modules and an invariant space need not be graded,
/// so no sum condition is imposed there.
pub fn isotypic_dimensions_exact(n: u32, vectors: &[Vec<Cyc>]) -> Result<Vec<usize>, Sym2Error> {
    let rep = SchrodingerRep::new(n).map_err(|_| Sym2Error::LevelTooSmall(n))?;
    let order = rep.cyc_order();
    let mons = QuadMonomials::new(n);
    for v in vectors {
        if v.len() != mons.dim() {
            return Err(Sym2Error::DimensionMismatch {
                got: v.len(),
                expected: mons.dim(),
            });
        }
    }
    let mut dims = vec![0usize; family_count(n)];
    for (f, dim) in dims.iter_mut().enumerate() {
        let basis = family_basis(n, f)?;
        let projected: Vec<Vec<Cyc>> = vectors
            .iter()
            .map(|v| project_onto(v, &basis, order, mons.dim()))
            .collect();
        *dim = exact_rank(order, &projected);
    }
    if n.is_multiple_of(2) {
        let total = exact_rank(order, vectors);
        let sum: usize = dims.iter().sum();
        if sum != total {
            return Err(Sym2Error::NotGraded { sum, dim: total });
        }
    }
    Ok(dims)
}

fn project_onto(v: &[Cyc], basis: &[Vec<Cyc>], order: u32, len: usize) -> Vec<Cyc> {
    let mut out = vec![Cyc::zero(order); len];
    for b in basis {
        // <v, b> with b rational-valued, divided by <b, b>.
        let mut dot = Cyc::zero(order);
        let mut norm2 = BigRational::from_integer(BigInt::from(0));
        for (vk, bk) in v.iter().zip(b) {
            let r = bk
                .as_rational()
                .expect("family bases have rational coefficients");
            if !r.is_zero() {
                dot += &vk.scaled(&r);
                norm2 += &r * &r;
            }
        }
        if dot.is_zero() {
            continue;
        }
        let coeff = dot.scaled(&norm2.recip());
        for (ok, bk) in out.iter_mut().zip(b) {
            if !bk.is_zero() {
                *ok += &(&coeff * bk);
            }
        }
    }
    out
}

/// Numerical projection dimensions onto each family for a space given by
/// orthonormal basis rows; singular values above `tol` count toward the
/// dimension. The even-level graded-sum check mirrors the exact version.
pub fn isotypic_dimensions_numeric(
    n: u32,
    rows: &DMatrix<Complex64>,
    tol: f64,
) -> Result<Vec<usize>, Sym2Error> {
    let mons = QuadMonomials::new(n);
    if rows.ncols() != mons.dim() {
        return Err(Sym2Error::DimensionMismatch {
            got: rows.ncols(),
            expected: mons.dim(),
        });
    }
    let bases = family_bases_numeric(n)?;
    let mut dims = vec![0usize; family_count(n)];
    for (f, basis) in bases.iter().enumerate() {
        if rows.nrows() == 0 {
            continue;
        }
        let overlap = rows * basis.adjoint();
        let svd = overlap.clone().svd(false, false);
        dims[f] = svd.singular_values.iter().filter(|&&s| s > tol).count();
    }
    if n.is_multiple_of(2) {
        let sum: usize = dims.iter().sum();
        if sum != rows.nrows() {
            return Err(Sym2Error::NotGraded {
                sum,
                dim: rows.nrows(),
            });
        }
    }
    Ok(dims)
}

/// Exact span membership for a batch of vectors, shared by the invariance
/// test suites.
pub fn span_contains_all(order: u32, span: &[Vec<Cyc>], vectors: &[Vec<Cyc>]) -> bool {
    let Some(first) = span.first().or_else(|| vectors.first()) else {
        return true;
    };
    let mut builder = SpanBuilder::new(order, first.len());
    for v in span {
        builder.insert(v);
    }
    vectors.iter().all(|v| builder.contains(v))
}
