//! Boneh-Shaw `(c, r)`-codes embedded into fingerprinted positions.
//!
//! Codeword `i` of a `(c, r)`-code has `(i-1)*r` zeros followed by
//! `(c-i)*r` ones. A one means "this position carries the common fingerprint
//! value", a zero means "this position carries the original value". The
//! code bits live at `f1 = (c-1)*r` positions drawn from the first
//! recipient's fingerprints; the order in which bits map to positions is the
//! owner's secret.

use std::ops::Range;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationModel;
use crate::fingerprint::{fingerprint_alg1, fingerprint_alg2, Preassignment};
use crate::model::{
    Fingerprint, FingerprintParams, FingerprintRecord, Sequence, SharingLedger, State,
};
use crate::seed::{self, stream};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BsConfigRepr", into = "BsConfigRepr")]
pub struct BsConfig {
    c: usize,
    r: usize,
}

#[derive(Serialize, Deserialize)]
struct BsConfigRepr {
    c: usize,
    r: usize,
    f1: usize,
}

impl TryFrom<BsConfigRepr> for BsConfig {
    type Error = Error;
    fn try_from(v: BsConfigRepr) -> Result<Self> {
        let config = BsConfig::new(v.c, v.r)?;
        if config.f1() != v.f1 {
            return Err(Error::Argument(format!(
                "f1 = {} but (c-1)*r = {}",
                v.f1,
                config.f1()
            )));
        }
        Ok(config)
    }
}

impl From<BsConfig> for BsConfigRepr {
    fn from(c: BsConfig) -> Self {
        BsConfigRepr {
            c: c.c,
            r: c.r,
            f1: c.f1(),
        }
    }
}

impl BsConfig {
    pub fn new(c: usize, r: usize) -> Result<Self> {
        if c < 2 {
            return Err(Error::Argument(format!(
                "need at least 2 codewords, got c = {c}"
            )));
        }
        if r < 1 {
            return Err(Error::Argument("block size r must be at least 1".into()));
        }
        Ok(BsConfig { c, r })
    }

    /// Pick `r` so that the code uses about half of the expected
    /// fingerprints: `r = floor((expected / 2) / (c - 1))`.
    pub fn auto(c: usize, expected_fingerprints: f64) -> Result<Self> {
        if c < 2 {
            return Err(Error::Argument(format!(
                "need at least 2 codewords, got c = {c}"
            )));
        }
        let r = ((expected_fingerprints / 2.0) / (c - 1) as f64).floor();
        if r < 1.0 {
            return Err(Error::Config(format!(
                "{expected_fingerprints} expected fingerprints cannot host a code with {c} codewords"
            )));
        }
        Self::new(c, r as usize)
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Codeword length `(c-1)*r`.
    pub fn f1(&self) -> usize {
        (self.c - 1) * self.r
    }

    /// Number of blocks, `c - 1`.
    pub fn blocks(&self) -> usize {
        self.c - 1
    }

    /// Codeword shared by 1-based recipient `sp_index`: `((i-1) mod c) + 1`.
    pub fn codeword_for(&self, sp_index: usize) -> usize {
        (sp_index - 1) % self.c + 1
    }

    /// Ones in codeword `i`: `(c-i)*r`.
    pub fn ones(&self, i: usize) -> usize {
        (self.c - i) * self.r
    }

    /// Bit `bit` (0-based) of codeword `i` (1-based), without bounds checks.
    pub(crate) fn bit(&self, i: usize, bit: usize) -> bool {
        bit >= (i - 1) * self.r
    }
}

/// Codeword `i` as 0/1 bits.
pub fn codeword(config: &BsConfig, i: usize) -> Result<Vec<u8>> {
    if i == 0 || i > config.c {
        return Err(Error::Argument(format!(
            "codeword index {i} outside 1..={}",
            config.c
        )));
    }
    Ok((0..config.f1()).map(|b| config.bit(i, b) as u8).collect())
}

/// Where the code bits live: bit `k` of every codeword sits at
/// `positions[k]`, and a one there means `fp_values[k]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeLayout {
    config: BsConfig,
    #[serde(with = "crate::model::one_based")]
    positions: Vec<usize>,
    fp_values: Vec<State>,
}

impl CodeLayout {
    pub fn new(config: BsConfig, positions: Vec<usize>, fp_values: Vec<State>) -> Result<Self> {
        let layout = CodeLayout {
            config,
            positions,
            fp_values,
        };
        layout.check_shape()?;
        Ok(layout)
    }

    fn check_shape(&self) -> Result<()> {
        if self.positions.len() != self.config.f1() || self.fp_values.len() != self.config.f1() {
            return Err(Error::Dimension(format!(
                "layout has {} positions and {} values for a code of length {}",
                self.positions.len(),
                self.fp_values.len(),
                self.config.f1()
            )));
        }
        let mut sorted = self.positions.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("layout positions must be distinct".into()));
        }
        Ok(())
    }

    pub(crate) fn validate(&self, l: usize) -> Result<()> {
        self.check_shape()?;
        if let Some(&j) = self.positions.iter().find(|&&j| j >= l) {
            return Err(Error::Argument(format!(
                "layout position {} outside 1..={l}",
                j + 1
            )));
        }
        Ok(())
    }

    pub fn config(&self) -> &BsConfig {
        &self.config
    }

    /// 0-based data positions, indexed by bit.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn fp_values(&self) -> &[State] {
        &self.fp_values
    }

    /// Bit indices (0-based) of 1-based block `b`.
    pub fn block_bits(&self, b: usize) -> Range<usize> {
        let r = self.config.r;
        (b - 1) * r..b * r
    }

    /// Code bits of codeword `w` as fixed points over `original`.
    pub fn preassignment(&self, original: &Sequence, w: usize) -> Result<Preassignment> {
        Preassignment::new(original, self.fixed_points(original, w))
    }

    pub(crate) fn fixed_points<'a>(
        &'a self,
        original: &'a Sequence,
        w: usize,
    ) -> impl Iterator<Item = (usize, State)> + 'a {
        self.positions
            .iter()
            .zip(&self.fp_values)
            .enumerate()
            .map(move |(bit, (&j, &v))| {
                if self.config.bit(w, bit) {
                    (j, v)
                } else {
                    (j, original[j])
                }
            })
    }
}

/// Choose `f1` of the first recipient's fingerprints and a secret bit order.
pub fn build_layout(sp1: &Fingerprint, config: BsConfig, seed: u64) -> Result<CodeLayout> {
    let f = sp1.len();
    let f1 = config.f1();
    if f < f1 {
        return Err(Error::InsufficientFingerprints {
            available: f,
            required: f1,
        });
    }
    let mut rng = seed::rng(seed);
    let mut chosen = index::sample(&mut rng, f, f1).into_vec();
    chosen.shuffle(&mut rng);
    let positions = chosen.iter().map(|&i| sp1.positions[i]).collect();
    let fp_values = chosen.iter().map(|&i| sp1.values[i]).collect();
    CodeLayout::new(config, positions, fp_values)
}

/// Seed used for recipient `sp_index` under `master_seed`.
pub fn recipient_seed(master_seed: u64, sp_index: usize) -> u64 {
    seed::derive(master_seed, &[stream::RECIPIENT, sp_index as u64])
}

/// Share with `num_sps` recipients: the first copy comes from the plain
/// generator, the code layout is cut from its fingerprints, and every later
/// recipient gets its codeword's bits fixed before the remaining points are
/// generated around them.
pub fn share_all(
    original: &Sequence,
    params: &FingerprintParams,
    model: &CorrelationModel,
    config: BsConfig,
    num_sps: usize,
    master_seed: u64,
) -> Result<SharingLedger> {
    if num_sps == 0 {
        return Err(Error::Argument("need at least one recipient".into()));
    }
    let seed1 = recipient_seed(master_seed, 1);
    let first = fingerprint_alg1(original, params, model, seed1)?;
    let layout = build_layout(
        &first.fingerprint,
        config,
        seed::derive(master_seed, &[stream::LAYOUT]),
    )?;

    let rest: Vec<FingerprintRecord> = (2..=num_sps)
        .into_par_iter()
        .map(|i| {
            let w = config.codeword_for(i);
            let pre = layout.preassignment(original, w)?;
            let s = recipient_seed(master_seed, i);
            let g = fingerprint_alg2(original, &pre, params, model, s)?;
            Ok(g.into_record(i, s, Some(w)).1)
        })
        .collect::<Result<_>>()?;

    let mut ledger = SharingLedger::new(original.clone(), *params)?;
    ledger.push(first.into_record(1, seed1, Some(1)).1)?;
    for record in rest {
        ledger.push(record)?;
    }
    ledger.set_code_layout(layout)?;
    Ok(ledger)
}

/// Boneh-Shaw codes on their own: the layout comes from a first generated
/// copy as in [`share_all`], but every copy carries only its code bits.
pub fn share_standalone(
    original: &Sequence,
    params: &FingerprintParams,
    model: &CorrelationModel,
    config: BsConfig,
    num_sps: usize,
    master_seed: u64,
) -> Result<SharingLedger> {
    if num_sps == 0 {
        return Err(Error::Argument("need at least one recipient".into()));
    }
    let seed1 = recipient_seed(master_seed, 1);
    let first = fingerprint_alg1(original, params, model, seed1)?;
    let layout = build_layout(
        &first.fingerprint,
        config,
        seed::derive(master_seed, &[stream::LAYOUT]),
    )?;
    let mut ledger = SharingLedger::new(original.clone(), *params)?;
    for i in 1..=num_sps {
        let w = config.codeword_for(i);
        let mut fixed: Vec<(usize, State)> = layout
            .fixed_points(original, w)
            .filter(|&(j, v)| v != original[j])
            .collect();
        fixed.sort_unstable();
        let fingerprint = Fingerprint {
            positions: fixed.iter().map(|p| p.0).collect(),
            values: fixed.iter().map(|p| p.1).collect(),
        };
        ledger.push(FingerprintRecord {
            sp_index: i,
            seed: 0,
            fingerprint,
            codeword_index: Some(w),
        })?;
    }
    ledger.set_code_layout(layout)?;
    Ok(ledger)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockClass {
    /// Strict majority of the block carries the fingerprint value.
    Ones,
    /// Strict majority of the block carries the original value.
    Zeros,
    Neither,
}

/// Classify 1-based block `b` of a leaked copy. A point counts as a one if it
/// equals the layout's fingerprint value, a zero if it equals the original,
/// and neither otherwise (including removed points).
pub fn classify_block(
    leaked: &Sequence,
    original: &Sequence,
    layout: &CodeLayout,
    b: usize,
) -> BlockClass {
    debug_assert!(b >= 1 && b <= layout.config.blocks());
    let (mut ones, mut zeros) = (0usize, 0usize);
    for bit in layout.block_bits(b) {
        let j = layout.positions[bit];
        let y = leaked[j];
        if y == layout.fp_values[bit] {
            ones += 1;
        } else if y == original[j] {
            zeros += 1;
        }
    }
    let r = layout.config.r;
    if 2 * ones > r {
        BlockClass::Ones
    } else if 2 * zeros > r {
        BlockClass::Zeros
    } else {
        BlockClass::Neither
    }
}

/// Classic Boneh-Shaw tracing: accuse the codeword where the leaked bits
/// switch to majority-ones. Codeword 1 needs only block 1 to be ones,
/// codeword `c` only block `c-1` to be zeros; with no switch, codeword 1.
pub fn bs_standalone_detect(leaked: &Sequence, original: &Sequence, layout: &CodeLayout) -> usize {
    let c = layout.config.c;
    let class: Vec<BlockClass> = (1..c)
        .map(|b| classify_block(leaked, original, layout, b))
        .collect();
    let block = |b: usize| class[b - 1];
    for i in 1..=c {
        let hit = if i == 1 {
            block(1) == BlockClass::Ones
        } else if i == c {
            block(c - 1) == BlockClass::Zeros
        } else {
            block(i - 1) != BlockClass::Ones && block(i) == BlockClass::Ones
        };
        if hit {
            return i;
        }
    }
    1
}

/// Codeword implied by a bit string (`b'1'`, `b'0'`, anything else random),
/// for reasoning about the classic construction on binary data.
#[cfg(test)]
fn detect_bits(bits: &str, config: BsConfig) -> usize {
    use crate::model::Alphabet;
    let a = Alphabet::new(3).unwrap();
    let f1 = config.f1();
    let original = Sequence::new(vec![0; f1], a).unwrap();
    let layout = CodeLayout::new(config, (0..f1).collect(), vec![1; f1]).unwrap();
    let leaked: Vec<State> = bits
        .bytes()
        .map(|b| match b {
            b'1' => 1,
            b'0' => 0,
            _ => 2,
        })
        .collect();
    bs_standalone_detect(&Sequence::new(leaked, a).unwrap(), &original, &layout)
}
