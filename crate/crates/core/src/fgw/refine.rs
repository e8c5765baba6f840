//! Colour-refinement matching used as an extra FGW start.
//!
//! Nodes of both graphs are coloured jointly by weight and features, then
//! refined by neighbour colours (1-WL). Ambiguous classes are split by
//! individualizing one node on each side, with a small backtracking budget.
//! The result is an exact isomorphism when one is found, otherwise the first
//! colour-consistent bijection reached, otherwise nothing.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::graph::AttributedGraph;
use crate::scalar::Scalar;

const SEARCH_BUDGET: usize = 256;

fn bits<T: Scalar>(v: T) -> u64 {
    (v.to_f64_lossy() + 0.0).to_bits()
}

struct Pair<'a, T: Scalar> {
    g1: &'a AttributedGraph<T>,
    g2: &'a AttributedGraph<T>,
}

impl<T: Scalar> Pair<'_, T> {
    fn initial(&self) -> (Vec<usize>, Vec<usize>) {
        let key = |g: &AttributedGraph<T>, i: usize| -> Vec<u64> {
            let mut k = vec![bits(g.node_weights()[i]), bits(g.adjacency()[[i, i]])];
            k.extend(g.features().row(i).iter().map(|&v| bits(v)));
            k
        };
        let k1: Vec<_> = (0..self.g1.num_nodes()).map(|i| key(self.g1, i)).collect();
        let k2: Vec<_> = (0..self.g2.num_nodes()).map(|i| key(self.g2, i)).collect();
        relabel(&k1, &k2)
    }

    fn refine(&self, mut c1: Vec<usize>, mut c2: Vec<usize>) -> (Vec<usize>, Vec<usize>) {
        let sig = |g: &AttributedGraph<T>, c: &[usize], i: usize| -> (usize, Vec<(usize, u64)>) {
            let mut nb: Vec<(usize, u64)> = g
                .adjacency()
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, &w)| j != i && w != T::zero())
                .map(|(j, &w)| (c[j], bits(w)))
                .collect();
            nb.sort_unstable();
            (c[i], nb)
        };
        let mut classes = count_classes(&c1, &c2);
        loop {
            let s1: Vec<_> = (0..c1.len()).map(|i| sig(self.g1, &c1, i)).collect();
            let s2: Vec<_> = (0..c2.len()).map(|i| sig(self.g2, &c2, i)).collect();
            let (n1, n2) = relabel(&s1, &s2);
            let next = count_classes(&n1, &n2);
            c1 = n1;
            c2 = n2;
            if next == classes {
                return (c1, c2);
            }
            classes = next;
        }
    }

    fn is_isomorphism(&self, sigma: &[usize]) -> bool {
        let (a1, a2) = (self.g1.adjacency(), self.g2.adjacency());
        let n = sigma.len();
        (0..n).all(|i| {
            self.g1.node_weights()[i] == self.g2.node_weights()[sigma[i]]
                && self.g1.features().row(i) == self.g2.features().row(sigma[i])
                && (0..n).all(|k| a1[[i, k]] == a2[[sigma[i], sigma[k]]])
        })
    }
}

fn relabel<K: Ord + Clone>(k1: &[K], k2: &[K]) -> (Vec<usize>, Vec<usize>) {
    let mut ids = BTreeMap::new();
    for k in k1.iter().chain(k2) {
        ids.entry(k.clone()).or_insert(0usize);
    }
    for (n, v) in ids.values_mut().enumerate() {
        *v = n;
    }
    (k1.iter().map(|k| ids[k]).collect(), k2.iter().map(|k| ids[k]).collect())
}

fn count_classes(c1: &[usize], c2: &[usize]) -> usize {
    let mut all: Vec<usize> = c1.iter().chain(c2).copied().collect();
    all.sort_unstable();
    all.dedup();
    all.len()
}

/// Histogram comparison; `None` if the two colourings are inconsistent.
fn class_members(c1: &[usize], c2: &[usize]) -> Option<BTreeMap<usize, (Vec<usize>, Vec<usize>)>> {
    let mut m: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, &c) in c1.iter().enumerate() {
        m.entry(c).or_default().0.push(i);
    }
    for (j, &c) in c2.iter().enumerate() {
        m.entry(c).or_default().1.push(j);
    }
    m.values().all(|(a, b)| a.len() == b.len()).then_some(m)
}

struct Search<'a, T: Scalar> {
    pair: Pair<'a, T>,
    budget: usize,
    fallback: Option<Vec<usize>>,
}

impl<T: Scalar> Search<'_, T> {
    fn run(&mut self, c1: Vec<usize>, c2: Vec<usize>) -> Option<Vec<usize>> {
        if self.budget == 0 {
            return None;
        }
        self.budget -= 1;
        let (c1, c2) = self.pair.refine(c1, c2);
        let members = class_members(&c1, &c2)?;
        let open = members
            .values()
            .filter(|(a, _)| a.len() > 1)
            .min_by_key(|(a, _)| a.len());
        let Some((left, right)) = open else {
            let mut sigma = vec![0; c1.len()];
            for (a, b) in members.values() {
                sigma[a[0]] = b[0];
            }
            if self.pair.is_isomorphism(&sigma) {
                return Some(sigma);
            }
            self.fallback.get_or_insert(sigma);
            return None;
        };
        let u = left[0];
        let fresh = c1.len() + c2.len() + 1;
        for &v in right {
            let (mut d1, mut d2) = (c1.clone(), c2.clone());
            d1[u] = fresh;
            d2[v] = fresh;
            if let Some(s) = self.run(d1, d2) {
                return Some(s);
            }
            if self.budget == 0 {
                break;
            }
        }
        None
    }
}

/// Coupling concentrated on a colour-consistent bijection, if the graphs
/// have equal size and compatible colour classes.
pub(crate) fn refinement_start<T: Scalar>(g1: &AttributedGraph<T>, g2: &AttributedGraph<T>) -> Option<Array2<T>> {
    let n = g1.num_nodes();
    if n != g2.num_nodes() || n == 0 {
        return None;
    }
    let pair = Pair { g1, g2 };
    let (c1, c2) = pair.initial();
    let mut search = Search {
        pair,
        budget: SEARCH_BUDGET,
        fallback: None,
    };
    let sigma = search.run(c1, c2).or(search.fallback)?;
    let mut pi = Array2::zeros((n, n));
    for (i, &j) in sigma.iter().enumerate() {
        pi[[i, j]] = g1.node_weights()[i];
    }
    Some(pi)
}
