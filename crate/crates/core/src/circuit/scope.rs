use std::fmt;

/// Set of variable indices, stored as a trimmed bitset so equal sets compare equal.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Scope {
    words: Vec<u64>,
}

impl Scope {
    pub fn singleton(var: usize) -> Self {
        let mut s = Self::default();
        s.insert(var);
        s
    }

    pub fn from_vars(vars: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::default();
        for v in vars {
            s.insert(v);
        }
        s
    }

    pub fn insert(&mut self, var: usize) {
        let w = var / 64;
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1 << (var % 64);
    }

    pub fn contains(&self, var: usize) -> bool {
        self.words.get(var / 64).is_some_and(|w| w & (1 << (var % 64)) != 0)
    }

    pub fn union_with(&mut self, other: &Scope) {
        if self.words.len() < other.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn is_disjoint(&self, other: &Scope) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(i, &w)| (0..64).filter(move |b| w & (1u64 << b) != 0).map(move |b| i * 64 + b))
    }

    pub fn max(&self) -> Option<usize> {
        self.iter().last()
    }
}

impl fmt::Debug for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
