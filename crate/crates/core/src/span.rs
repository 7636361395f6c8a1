//! Spans of Pauli labels over F2^{2n}.

use crate::pauli::PauliLabel;

/// Reduced basis of `span_{F2}` of a label set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanBasis {
    n: usize,
    /// Basis vectors as label indices, each with a distinct leading bit.
    basis: Vec<u64>,
}

impl SpanBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// `2^rank`.
    pub fn size(&self) -> u128 {
        1u128 << self.rank()
    }

    pub fn basis(&self) -> Vec<PauliLabel> {
        self.basis.iter().map(|&v| PauliLabel::from_index(self.n, v)).collect()
    }

    fn reduce(&self, mut v: u64) -> u64 {
        for &b in &self.basis {
            let lead = 63 - b.leading_zeros();
            if (v >> lead) & 1 == 1 {
                v ^= b;
            }
        }
        v
    }

    pub fn contains(&self, label: &PauliLabel) -> bool {
        label.n() == self.n && self.reduce(label.index()) == 0
    }

    /// All `2^rank` labels in the span, in ascending index order.
    pub fn enumerate(&self) -> Vec<PauliLabel> {
        assert!(self.rank() <= 24, "span too large to enumerate");
        let mut out: Vec<u64> = (0u64..1 << self.rank())
            .map(|mask| {
                self.basis.iter().enumerate().filter(|(i, _)| (mask >> i) & 1 == 1).fold(0u64, |acc, (_, &b)| acc ^ b)
            })
            .collect();
        out.sort_unstable();
        out.into_iter().map(|v| PauliLabel::from_index(self.n, v)).collect()
    }
}

/// Gaussian elimination over F2 on the symplectic vectors of `labels`.
pub fn f2_span<'a>(n: usize, labels: impl IntoIterator<Item = &'a PauliLabel>) -> SpanBasis {
    let mut span = SpanBasis { n, basis: Vec::new() };
    for label in labels {
        assert_eq!(label.n(), n, "qubit count mismatch");
        let v = span.reduce(label.index());
        if v == 0 {
            continue;
        }
        let lead = 63 - v.leading_zeros();
        // Keep the basis fully reduced so `reduce` is a single pass.
        for b in span.basis.iter_mut() {
            if (*b >> lead) & 1 == 1 {
                *b ^= v;
            }
        }
        span.basis.push(v);
        span.basis.sort_unstable_by(|x, y| y.cmp(x));
    }
    span
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> PauliLabel {
        s.parse().unwrap()
    }

    #[test]
    fn empty_span() {
        let s = f2_span(1, []);
        assert_eq!(s.rank(), 0);
        assert_eq!(s.enumerate(), vec![PauliLabel::identity(1)]);
    }

    #[test]
    fn single_x() {
        let s = f2_span(1, [&l("X")]);
        assert_eq!(s.rank(), 1);
        assert_eq!(s.enumerate().len(), 2);
        assert!(s.contains(&l("X")) && s.contains(&l("I")) && !s.contains(&l("Z")));
    }

    #[test]
    fn x_and_z_generate_y() {
        let s = f2_span(2, [&l("XI"), &l("ZI")]);
        assert_eq!(s.rank(), 2);
        let all = s.enumerate();
        assert_eq!(all.len(), 4);
        assert!(all.contains(&l("YI")));
    }

    #[test]
    fn dependent_input() {
        let s = f2_span(2, [&l("XZ"), &l("ZX"), &l("YY")]);
        assert_eq!(s.rank(), 2);
    }
}
