use super::BoolExpr;

// Bit pattern of variable i < 6 inside one 64-row word.
const LOW_PATTERNS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

/// Packed truth table over an ordered variable list.
///
/// Row `r` assigns `vars[i]` the value of bit `i` of `r`. Bits beyond `2^n`
/// in the last word are kept zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthTable {
    vars: Vec<u32>,
    words: Vec<u64>,
}

impl TruthTable {
    fn word_count(n: usize) -> usize {
        if n <= 6 {
            1
        } else {
            1 << (n - 6)
        }
    }

    fn tail_mask(n: usize) -> u64 {
        if n >= 6 {
            !0
        } else {
            (1u64 << (1 << n)) - 1
        }
    }

    pub fn constant(vars: &[u32], value: bool) -> Self {
        let n = vars.len();
        let fill = if value { Self::tail_mask(n) } else { 0 };
        TruthTable {
            vars: vars.to_vec(),
            words: vec![fill; Self::word_count(n)],
        }
    }

    /// Table of the `i`-th variable of `vars`.
    pub fn projection(vars: &[u32], i: usize) -> Self {
        let n = vars.len();
        let mask = Self::tail_mask(n);
        let words = (0..Self::word_count(n))
            .map(|w| {
                if i < 6 {
                    LOW_PATTERNS[i] & mask
                } else if (w >> (i - 6)) & 1 == 1 {
                    !0
                } else {
                    0
                }
            })
            .collect();
        TruthTable {
            vars: vars.to_vec(),
            words,
        }
    }

    /// Tabulates `e` over `vars`, which must contain its support.
    ///
    /// Panics if a support variable is missing from `vars`.
    pub fn of(e: &BoolExpr, vars: &[u32]) -> Self {
        match e {
            BoolExpr::Const(b) => Self::constant(vars, *b),
            BoolExpr::Var(v) => {
                let i = vars
                    .iter()
                    .position(|w| w == v)
                    .unwrap_or_else(|| panic!("x{v} missing from truth-table variables"));
                Self::projection(vars, i)
            }
            BoolExpr::Not(c) => Self::of(c, vars).complement(),
            BoolExpr::And(cs) => Self::fold(cs, vars, |a, b| a & b),
            BoolExpr::Or(cs) => Self::fold(cs, vars, |a, b| a | b),
            BoolExpr::Xor(cs) => Self::fold(cs, vars, |a, b| a ^ b),
            BoolExpr::Xnor(cs) => Self::fold(cs, vars, |a, b| a ^ b).complement(),
        }
    }

    fn fold(cs: &[BoolExpr], vars: &[u32], op: impl Fn(u64, u64) -> u64) -> Self {
        let mut acc = Self::of(&cs[0], vars);
        for c in &cs[1..] {
            let t = Self::of(c, vars);
            for (a, b) in acc.words.iter_mut().zip(&t.words) {
                *a = op(*a, *b);
            }
        }
        acc
    }

    pub fn vars(&self) -> &[u32] {
        &self.vars
    }

    pub fn num_rows(&self) -> usize {
        1 << self.vars.len()
    }

    #[inline]
    pub fn get(&self, row: usize) -> bool {
        self.words[row >> 6] >> (row & 63) & 1 == 1
    }

    pub fn complement(&self) -> Self {
        let mask = Self::tail_mask(self.vars.len());
        TruthTable {
            vars: self.vars.clone(),
            words: self.words.iter().map(|w| !w & mask).collect(),
        }
    }

    pub fn xor(&self, other: &Self) -> Self {
        debug_assert_eq!(self.vars, other.vars);
        TruthTable {
            vars: self.vars.clone(),
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
        }
    }

    pub fn is_complement_of(&self, other: &Self) -> bool {
        debug_assert_eq!(self.vars, other.vars);
        let mask = Self::tail_mask(self.vars.len());
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| (a ^ b) == mask)
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_ones(&self) -> bool {
        let mask = Self::tail_mask(self.vars.len());
        self.words.iter().all(|&w| w == mask)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Whether flipping variable `i` ever changes the value.
    pub fn depends_on(&self, i: usize) -> bool {
        let stride = 1usize << i;
        (0..self.num_rows())
            .filter(|r| r & stride == 0)
            .any(|r| self.get(r) != self.get(r | stride))
    }
}
