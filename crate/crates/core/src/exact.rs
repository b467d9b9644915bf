//! Small exact linear algebra over cyclotomic scalars: incremental echelon
//! forms, rank, and span membership. Sizes here are tiny (vectors of length
//! `n(n+1)/2` with a handful of nonzero entries), so plain Gaussian
//! elimination with exact field inverses is enough.

use crate::cyclotomic::Cyc;

/// Row echelon accumulator over `Q(zeta_N)^len`.
pub struct SpanBuilder {
    order: u32,
    len: usize,
    /// Reduced rows, each normalized to a unit pivot; parallel pivot columns.
    rows: Vec<Vec<Cyc>>,
    pivots: Vec<usize>,
}

impl SpanBuilder {
    pub fn new(order: u32, len: usize) -> Self {
        SpanBuilder {
            order,
            len,
            rows: vec![],
            pivots: vec![],
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduce `v` against the current rows; the remainder is zero exactly
    /// when `v` lies in the span.
    fn residue(&self, v: &[Cyc]) -> Vec<Cyc> {
        assert_eq!(v.len(), self.len, "vector length mismatch");
        let mut w = v.to_vec();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if w[p].is_zero() {
                continue;
            }
            let factor = w[p].clone();
            for (wi, ri) in w.iter_mut().zip(row) {
                if !ri.is_zero() {
                    *wi -= &(&factor * ri);
                }
            }
        }
        w
    }

    pub fn contains(&self, v: &[Cyc]) -> bool {
        self.residue(v).iter().all(Cyc::is_zero)
    }

    /// Insert a vector; returns true when it enlarged the span.
    pub fn insert(&mut self, v: &[Cyc]) -> bool {
        let w = self.residue(v);
        let Some(p) = w.iter().position(|c| !c.is_zero()) else {
            return false;
        };
        let inv = w[p].inv().expect("nonzero pivot");
        let row: Vec<Cyc> = w.iter().map(|c| c * &inv).collect();
        // Keep earlier rows reduced against the new pivot so residues stay canonical.
        for r in &mut self.rows {
            if !r[p].is_zero() {
                let f = r[p].clone();
                for (ri, wi) in r.iter_mut().zip(&row) {
                    if !wi.is_zero() {
                        *ri -= &(&f * wi);
                    }
                }
            }
        }
        self.rows.push(row);
        self.pivots.push(p);
        true
    }

    pub fn order(&self) -> u32 {
        self.order
    }
}

/// Rank of a set of vectors over the cyclotomic field.
pub fn exact_rank(order: u32, vectors: &[Vec<Cyc>]) -> usize {
    let Some(first) = vectors.first() else {
        return 0;
    };
    let mut span = SpanBuilder::new(order, first.len());
    for v in vectors {
        span.insert(v);
    }
    span.rank()
}

/// True when every vector of `inner` lies in the span of `outer`.
pub fn spans_contain(order: u32, outer: &[Vec<Cyc>], inner: &[Vec<Cyc>]) -> bool {
    let len = outer
        .first()
        .or_else(|| inner.first())
        .map_or(0, Vec::len);
    let mut span = SpanBuilder::new(order, len);
    for v in outer {
        span.insert(v);
    }
    inner.iter().all(|v| span.contains(v))
}

/// True when the two sets span the same subspace.
pub fn spans_equal(order: u32, a: &[Vec<Cyc>], b: &[Vec<Cyc>]) -> bool {
    spans_contain(order, a, b) && spans_contain(order, b, a)
}
