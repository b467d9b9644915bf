//! The finite Heisenberg group of level n in its Schroedinger representation,
//! acting on the coordinate space `V = <x_0, ..., x_{n-1}>` and on the space
//! of quadrics `W = Sym^2 V`.
//!
//! Generators, on coordinates with indices in `Z_n`:
//!
//! ```text
//! sigma(x_j) = x_{j-1}
//! tau(x_j)   = eps^j x_j,   eps = e^(2*pi*i/n)
//! ```
//!
//! These satisfy `sigma tau = eps * (tau sigma)`, equivalently
//! `sigma tau sigma^-1 tau^-1 = eps * id`; the direction of the scalar is
//! fixed by direct matrix computation at n = 3 (see the unit tests). All
//! matrix entries are exact cyclotomic numbers. Values are immutable after
//! construction and safe to share across threads.

use crate::cyclotomic::Cyc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HeisenbergError {
    #[error("level must be at least 2, got {0}")]
    LevelTooSmall(u32),
    #[error("operation requires an even level, got {0}")]
    OddLevel(u32),
    #[error("quadric has {got} coefficients, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("component W_{l}^{sign} does not exist at level {n}")]
    EmptyComponent { n: u32, l: u32, sign: char },
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u32, b: u32) -> u32 {
    a / gcd(a, b) * b
}

/// Sign of a `+`/`-` component family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// The Schroedinger representation of the level-n Heisenberg group.
///
/// Scalars live in the cyclotomic field of order `lcm(n, 4)`; the fourth
/// roots are needed downstream for eigenvectors of `sigma^d tau^d` when
/// `n = 2d` with d odd.
#[derive(Debug, Clone)]
pub struct SchrodingerRep {
    n: u32,
    cyc_order: u32,
}

impl SchrodingerRep {
    pub fn new(n: u32) -> Result<Self, HeisenbergError> {
        if n < 2 {
            return Err(HeisenbergError::LevelTooSmall(n));
        }
        Ok(SchrodingerRep {
            n,
            cyc_order: lcm(n, 4),
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn cyc_order(&self) -> u32 {
        self.cyc_order
    }

    /// The primitive n-th root of unity `eps`, exact.
    pub fn epsilon(&self) -> Cyc {
        self.epsilon_pow(1)
    }

    /// `eps^e`, exact; exponents reduce modulo n.
    pub fn epsilon_pow(&self, e: i64) -> Cyc {
        let step = (self.cyc_order / self.n) as i64;
        Cyc::root(self.cyc_order, step * e.rem_euclid(self.n as i64))
    }

    /// The coordinate shift `sigma` as an exact monomial matrix.
    pub fn sigma(&self) -> MonomialMatrix {
        let n = self.n as usize;
        MonomialMatrix {
            n: self.n,
            cyc_order: self.cyc_order,
            target: (0..n).map(|j| (j + n - 1) % n).collect(),
            scale: (0..n).map(|_| Cyc::one(self.cyc_order)).collect(),
        }
    }

    /// The diagonal generator `tau` as an exact monomial matrix.
    pub fn tau(&self) -> MonomialMatrix {
        let n = self.n as usize;
        MonomialMatrix {
            n: self.n,
            cyc_order: self.cyc_order,
            target: (0..n).collect(),
            scale: (0..n).map(|j| self.epsilon_pow(j as i64)).collect(),
        }
    }

    pub fn word_matrix(&self, word: &Word) -> MonomialMatrix {
        let mut m = MonomialMatrix::identity(self.n, self.cyc_order);
        // Rightmost factor acts first, matching function composition.
        for &(gen, exp) in word.0.iter().rev() {
            let base = match gen {
                Gen::Sigma => self.sigma(),
                Gen::Tau => self.tau(),
            };
            m = base.pow(exp).compose(&m);
        }
        m
    }
}

/// One generator of the Heisenberg group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gen {
    Sigma,
    Tau,
}

/// A word `g_1^{e_1} g_2^{e_2} ...` in the generators; the rightmost factor
/// is applied first when the word acts on vectors or quadrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word(pub Vec<(Gen, i64)>);

impl Word {
    pub fn sigma(e: i64) -> Self {
        Word(vec![(Gen::Sigma, e)])
    }

    pub fn tau(e: i64) -> Self {
        Word(vec![(Gen::Tau, e)])
    }

    pub fn inverse(&self) -> Word {
        Word(
            self.0
                .iter()
                .rev()
                .map(|&(g, e)| (g, -e))
                .collect(),
        )
    }
}

/// An exact monomial matrix: `x_j -> scale[j] * x_{target[j]}`.
///
/// The generators and all their words have this shape, which keeps word
/// arithmetic O(n) instead of O(n^3).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialMatrix {
    n: u32,
    cyc_order: u32,
    target: Vec<usize>,
    scale: Vec<Cyc>,
}

impl MonomialMatrix {
    pub fn identity(n: u32, cyc_order: u32) -> Self {
        MonomialMatrix {
            n,
            cyc_order,
            target: (0..n as usize).collect(),
            scale: (0..n).map(|_| Cyc::one(cyc_order)).collect(),
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn target(&self, j: usize) -> usize {
        self.target[j]
    }

    pub fn scale(&self, j: usize) -> &Cyc {
        &self.scale[j]
    }

    /// `(self o other)(x_j) = self(other(x_j))`.
    pub fn compose(&self, other: &MonomialMatrix) -> MonomialMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n as usize;
        let mut target = Vec::with_capacity(n);
        let mut scale = Vec::with_capacity(n);
        for j in 0..n {
            let k = other.target[j];
            target.push(self.target[k]);
            scale.push(&other.scale[j] * &self.scale[k]);
        }
        MonomialMatrix {
            n: self.n,
            cyc_order: self.cyc_order,
            target,
            scale,
        }
    }

    pub fn inverse(&self) -> MonomialMatrix {
        let n = self.n as usize;
        let mut target = vec![0usize; n];
        let mut scale = vec![Cyc::zero(self.cyc_order); n];
        for (j, &t) in self.target.iter().enumerate() {
            target[t] = j;
            scale[t] = self.scale[j].inv().expect("monomial scales are units");
        }
        MonomialMatrix {
            n: self.n,
            cyc_order: self.cyc_order,
            target,
            scale,
        }
    }

    pub fn pow(&self, e: i64) -> MonomialMatrix {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut acc = MonomialMatrix::identity(self.n, self.cyc_order);
        for _ in 0..e.unsigned_abs() {
            acc = base.compose(&acc);
        }
        acc
    }

    /// True when this map is `scalar * identity`; returns the scalar.
    pub fn as_scalar(&self) -> Option<Cyc> {
        let n = self.n as usize;
        if (0..n).any(|j| self.target[j] != j) {
            return None;
        }
        let s = self.scale[0].clone();
        if self.scale.iter().all(|c| *c == s) {
            Some(s)
        } else {
            None
        }
    }

    /// Dense exact matrix, rows and columns indexed by the coordinate basis.
    pub fn dense(&self) -> Vec<Vec<Cyc>> {
        let n = self.n as usize;
        let mut m = vec![vec![Cyc::zero(self.cyc_order); n]; n];
        for j in 0..n {
            m[self.target[j]][j] = self.scale[j].clone();
        }
        m
    }
}

/// The ordered monomial basis `{x_i x_j : 0 <= i <= j <= n-1}` of `Sym^2 V`.
#[derive(Debug, Clone)]
pub struct QuadMonomials {
    n: u32,
    pairs: Vec<(u32, u32)>,
}

impl QuadMonomials {
    pub fn new(n: u32) -> Self {
        let mut pairs = Vec::with_capacity((n * (n + 1) / 2) as usize);
        for i in 0..n {
            for j in i..n {
                pairs.push((i, j));
            }
        }
        QuadMonomials { n, pairs }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    /// Index of `x_i x_j`; indices reduce modulo n and sort.
    pub fn index(&self, i: i64, j: i64) -> usize {
        let n = self.n as i64;
        let mut a = i.rem_euclid(n) as u32;
        let mut b = j.rem_euclid(n) as u32;
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        let a64 = a as usize;
        let n64 = self.n as usize;
        a64 * n64 - a64 * (a64.wrapping_sub(1)) / 2 + (b as usize - a64)
    }

    pub fn pair(&self, k: usize) -> (u32, u32) {
        self.pairs[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, (u32, u32))> + '_ {
        self.pairs.iter().copied().enumerate()
    }
}

/// The induced Heisenberg action on `W = Sym^2 V` by multiplicative
/// substitution `g . (x_i x_j) = g(x_i) g(x_j)`.
#[derive(Debug, Clone)]
pub struct GroupAction2 {
    rep: SchrodingerRep,
    monomials: QuadMonomials,
}

impl GroupAction2 {
    pub fn new(rep: SchrodingerRep) -> Self {
        let monomials = QuadMonomials::new(rep.n());
        GroupAction2 { rep, monomials }
    }

    pub fn rep(&self) -> &SchrodingerRep {
        &self.rep
    }

    pub fn monomials(&self) -> &QuadMonomials {
        &self.monomials
    }

    pub fn act_word(&self, word: &Word, q: &[Cyc]) -> Result<Vec<Cyc>, HeisenbergError> {
        self.act_matrix(&self.rep.word_matrix(word), q)
    }

    pub fn act_matrix(
        &self,
        m: &MonomialMatrix,
        q: &[Cyc],
    ) -> Result<Vec<Cyc>, HeisenbergError> {
        if q.len() != self.monomials.dim() {
            return Err(HeisenbergError::DimensionMismatch {
                got: q.len(),
                expected: self.monomials.dim(),
            });
        }
        let mut out = vec![Cyc::zero(self.rep.cyc_order()); q.len()];
        for (k, (i, j)) in self.monomials.iter() {
            if q[k].is_zero() {
                continue;
            }
            let ti = m.target(i as usize);
            let tj = m.target(j as usize);
            let coeff = &(&q[k] * m.scale(i as usize)) * m.scale(j as usize);
            let idx = self.monomials.index(ti as i64, tj as i64);
            out[idx] += &coeff;
        }
        Ok(out)
    }
}

/// Exact action of a generator word on a quadric in the fixed monomial order.
pub fn act_on_quadric(
    rep: &SchrodingerRep,
    word: &Word,
    q: &[Cyc],
) -> Result<Vec<Cyc>, HeisenbergError> {
    GroupAction2::new(rep.clone()).act_word(word, q)
}

/// The scalars by which the order-two central elements `sigma^d` and `tau^d`
/// act on the component family `W_l^sign` of `Sym^2 V` at even level `n = 2d`.
///
/// `sigma^d` multiplies the family by the sign, `tau^d` by `(-1)^l`; the four
/// `(sign, l)` pairs are pairwise distinct, which separates the four families.
/// The scalars are extracted by applying the exact action to a witness basis
/// vector rather than hardcoding the formula.
pub fn central_signature(n: u32, l: u32, sign: Sign) -> Result<(i8, i8), HeisenbergError> {
    let rep = SchrodingerRep::new(n)?;
    if !n.is_multiple_of(2) {
        return Err(HeisenbergError::OddLevel(n));
    }
    let d = n / 2;
    // Witness basis vector: x_l x_0 + sign * x_{l+d} x_d  (offset m = l).
    // It exists whenever the family is nonempty; the only empty case is the
    // minus family at offset d, which at l = d % 2 = l means d = 1, n = 2.
    if sign == Sign::Minus && l % 2 == d % 2 && d == 1 && l == 1 {
        return Err(HeisenbergError::EmptyComponent {
            n,
            l,
            sign: sign.symbol(),
        });
    }
    let action = GroupAction2::new(rep.clone());
    let mons = action.monomials();
    let order = rep.cyc_order();
    let mut witness = vec![Cyc::zero(order); mons.dim()];
    witness[mons.index(l as i64, 0)] = Cyc::one(order);
    let partner = mons.index(l as i64 + d as i64, d as i64);
    witness[partner] = &witness[partner] + &Cyc::integer(order, sign.factor());

    let mut scalars = [0i8; 2];
    for (slot, word) in [Word::sigma(d as i64), Word::tau(d as i64)]
        .iter()
        .enumerate()
    {
        let image = action.act_word(word, &witness)?;
        let s = extract_scalar(&witness, &image, order);
        scalars[slot] = s.expect("central element acts by +1 or -1 on the family");
    }
    Ok((scalars[0], scalars[1]))
}

/// If `image == s * v` with `s = +1` or `s = -1`, return `s`.
fn extract_scalar(v: &[Cyc], image: &[Cyc], order: u32) -> Option<i8> {
    for s in [1i8, -1] {
        let factor = Cyc::integer(order, s as i64);
        if v
            .iter()
            .zip(image)
            .all(|(a, b)| *b == &factor * a)
        {
            return Some(s);
        }
    }
    None
}
