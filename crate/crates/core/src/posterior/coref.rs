use crate::model::canonicalize;

/// `delta[q][r] = 1` when records `q` and `r` share a latent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreferenceMatrix {
    n: usize,
    cells: Vec<bool>,
}

pub fn coreference_matrix(lambda: &[u32]) -> CoreferenceMatrix {
    let n = lambda.len();
    let mut cells = vec![false; n * n];
    for q in 0..n {
        for r in 0..n {
            cells[q * n + r] = lambda[q] == lambda[r];
        }
    }
    CoreferenceMatrix { n, cells }
}

impl CoreferenceMatrix {
    pub fn from_cells(n: usize, cells: Vec<bool>) -> Option<Self> {
        (cells.len() == n * n).then_some(Self { n, cells })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, q: usize, r: usize) -> bool {
        self.cells[q * self.n + r]
    }

    /// Reflexive, symmetric and transitive.
    pub fn is_equivalence(&self) -> bool {
        let n = self.n;
        for q in 0..n {
            if !self.get(q, q) {
                return false;
            }
            for r in 0..n {
                if self.get(q, r) != self.get(r, q) {
                    return false;
                }
                if self.get(q, r) && (0..n).any(|s| self.get(r, s) && !self.get(q, s)) {
                    return false;
                }
            }
        }
        true
    }

    /// Record partition as labels numbered by first appearance; `None` if the
    /// matrix is not an equivalence relation.
    pub fn to_partition(&self) -> Option<Vec<u32>> {
        if !self.is_equivalence() {
            return None;
        }
        let mut rep = vec![0u32; self.n];
        for q in 0..self.n {
            rep[q] = (0..=q).find(|&r| self.get(q, r)).unwrap() as u32;
        }
        Some(canonicalize(&rep))
    }
}
