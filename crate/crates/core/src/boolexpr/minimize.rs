//! Two-level minimization over a packed truth table.
//!
//! Prime implicants come from a ternary-cube table: a cube with a free
//! position is an implicant iff both of its halves are, which is the
//! Quine-McCluskey merge step run over every cube at once (3^n entries).
//! The cover takes essential primes, then greedy picks, then drops redundant
//! picks. The result is a valid cover, not necessarily a minimum one.

use crate::cnf::Literal;

use super::TruthTable;

/// A product term. `care` bit i set means variable i appears, with polarity
/// given by bit i of `value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    pub care: u32,
    pub value: u32,
}

impl Cube {
    pub fn literal_count(&self) -> u32 {
        self.care.count_ones()
    }

    pub fn contains(&self, row: u32) -> bool {
        row & self.care == self.value
    }

    /// Literals of the cube over the ordered variable list.
    pub fn literals<'a>(&'a self, vars: &'a [u32]) -> impl Iterator<Item = Literal> + 'a {
        (0..vars.len()).filter(|&i| self.care >> i & 1 == 1).map(move |i| Literal {
            var: vars[i],
            negated: self.value >> i & 1 == 0,
        })
    }

    fn rows(&self, n: usize) -> impl Iterator<Item = u32> + '_ {
        let free = !self.care & ((1u32 << n) - 1);
        // enumerate subsets of the free mask
        let mut sub = 0u32;
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let row = self.value | sub;
            sub = sub.wrapping_sub(free) & free;
            if sub == 0 {
                done = true;
            }
            Some(row)
        })
    }
}

/// Ternary digit 2 marks a free position.
fn decode(mut idx: usize, n: usize) -> Cube {
    let mut care = 0u32;
    let mut value = 0u32;
    for i in 0..n {
        match idx % 3 {
            0 => care |= 1 << i,
            1 => {
                care |= 1 << i;
                value |= 1 << i;
            }
            _ => {}
        }
        idx /= 3;
    }
    Cube { care, value }
}

/// All prime implicants of the on-set, in ternary index order.
pub fn prime_implicants(table: &TruthTable) -> Vec<Cube> {
    let n = table.vars().len();
    assert!(n <= 16, "prime generation is limited to 16 variables");
    let pow3: Vec<usize> = (0..=n).map(|i| 3usize.pow(i as u32)).collect();
    let total = pow3[n];
    let mut implicant = vec![false; total];
    for idx in 0..total {
        // lowest free position
        let mut rest = idx;
        let mut free = None;
        let mut row = 0usize;
        for i in 0..n {
            match rest % 3 {
                1 => row |= 1 << i,
                2 if free.is_none() => free = Some(i),
                _ => {}
            }
            rest /= 3;
        }
        implicant[idx] = match free {
            None => table.get(row),
            Some(j) => implicant[idx - 2 * pow3[j]] && implicant[idx - pow3[j]],
        };
    }
    let mut primes = Vec::new();
    for idx in 0..total {
        if !implicant[idx] {
            continue;
        }
        let mut rest = idx;
        let mut prime = true;
        for p in pow3.iter().take(n) {
            let digit = rest % 3;
            rest /= 3;
            if digit != 2 && implicant[idx + (2 - digit) * p] {
                prime = false;
                break;
            }
        }
        if prime {
            primes.push(decode(idx, n));
        }
    }
    primes
}

/// Sum-of-products cover of the table's on-set.
pub fn minimize_sop(table: &TruthTable) -> Vec<Cube> {
    let n = table.vars().len();
    let rows = table.num_rows();
    let primes = prime_implicants(table);
    if primes.is_empty() {
        return Vec::new();
    }
    let words = rows.div_ceil(64);
    let covers: Vec<Vec<u64>> = primes
        .iter()
        .map(|p| {
            let mut bits = vec![0u64; words];
            for r in p.rows(n) {
                bits[r as usize >> 6] |= 1 << (r & 63);
            }
            bits
        })
        .collect();

    let mut uncovered = vec![0u64; words];
    for r in 0..rows {
        if table.get(r) {
            uncovered[r >> 6] |= 1 << (r & 63);
        }
    }
    let mut chosen: Vec<usize> = Vec::new();

    // essentials: on-set rows covered by a single prime
    for r in 0..rows {
        if !table.get(r) {
            continue;
        }
        let mut only = None;
        let mut count = 0;
        for (pi, c) in covers.iter().enumerate() {
            if c[r >> 6] >> (r & 63) & 1 == 1 {
                count += 1;
                only = Some(pi);
                if count > 1 {
                    break;
                }
            }
        }
        if count == 1 {
            let pi = only.unwrap();
            if !chosen.contains(&pi) {
                chosen.push(pi);
            }
        }
    }
    for &pi in &chosen {
        clear(&mut uncovered, &covers[pi]);
    }

    while uncovered.iter().any(|&w| w != 0) {
        let best = (0..primes.len())
            .filter(|pi| !chosen.contains(pi))
            .max_by(|&a, &b| {
                let ga = gain(&uncovered, &covers[a]);
                let gb = gain(&uncovered, &covers[b]);
                ga.cmp(&gb)
                    .then(primes[b].literal_count().cmp(&primes[a].literal_count()))
                    .then(b.cmp(&a))
            })
            .expect("primes cover the on-set");
        clear(&mut uncovered, &covers[best]);
        chosen.push(best);
    }

    // drop picks whose rows the others already cover
    let mut i = chosen.len();
    while i > 0 {
        i -= 1;
        let candidate = chosen[i];
        let mut others = vec![0u64; words];
        for (j, &pj) in chosen.iter().enumerate() {
            if j != i {
                for (o, c) in others.iter_mut().zip(&covers[pj]) {
                    *o |= c;
                }
            }
        }
        if covers[candidate]
            .iter()
            .zip(&others)
            .all(|(c, o)| c & !o == 0)
        {
            chosen.remove(i);
        }
    }

    let mut cubes: Vec<Cube> = chosen.into_iter().map(|pi| primes[pi]).collect();
    cubes.sort();
    cubes
}

fn gain(uncovered: &[u64], cover: &[u64]) -> u32 {
    uncovered.iter().zip(cover).map(|(u, c)| (u & c).count_ones()).sum()
}

fn clear(uncovered: &mut [u64], cover: &[u64]) {
    for (u, c) in uncovered.iter_mut().zip(cover) {
        *u &= !c;
    }
}
