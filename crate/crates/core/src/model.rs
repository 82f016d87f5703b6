//! Shared domain types: alphabets, sequences, fingerprint records and the
//! sharing ledger.
//!
//! States are integer coded `0..m`; the removed-point sentinel is [`REMOVED`]
//! (`-1`). Positions are 0-based in memory and 1-based in every external
//! format (ledger JSON, reports, CLI).

use serde::{Deserialize, Serialize};

use crate::boneh_shaw::CodeLayout;
use crate::{Error, Result};

pub mod io;

/// Integer code of a data point's state.
pub type State = i32;

/// Marker for a point removed from a leaked copy.
pub const REMOVED: State = -1;

/// The `m`-ary state set `{0, .., m-1}` shared by every sequence of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "AlphabetRepr", into = "AlphabetRepr")]
pub struct Alphabet {
    m: usize,
}

#[derive(Serialize, Deserialize)]
struct AlphabetRepr {
    m: usize,
}

impl TryFrom<AlphabetRepr> for Alphabet {
    type Error = Error;
    fn try_from(r: AlphabetRepr) -> Result<Self> {
        Alphabet::new(r.m)
    }
}

impl From<Alphabet> for AlphabetRepr {
    fn from(a: Alphabet) -> Self {
        AlphabetRepr { m: a.m }
    }
}

impl Alphabet {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Argument(format!(
                "alphabet needs at least 2 states, got {m}"
            )));
        }
        if m > State::MAX as usize {
            return Err(Error::Argument(format!(
                "alphabet of {m} states is too large"
            )));
        }
        Ok(Alphabet { m })
    }

    /// Number of states `m`.
    pub fn size(self) -> usize {
        self.m
    }

    pub fn states(self) -> impl Iterator<Item = State> {
        0..self.m as State
    }

    pub fn contains(self, s: State) -> bool {
        s >= 0 && (s as usize) < self.m
    }

    pub fn removed(self) -> State {
        REMOVED
    }
}

/// A length-`l` vector of states. Leaked copies may also carry [`REMOVED`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SequenceRepr", into = "SequenceRepr")]
pub struct Sequence {
    alphabet: Alphabet,
    values: Vec<State>,
}

#[derive(Serialize, Deserialize)]
struct SequenceRepr {
    m: usize,
    values: Vec<State>,
}

impl TryFrom<SequenceRepr> for Sequence {
    type Error = Error;
    fn try_from(r: SequenceRepr) -> Result<Self> {
        Sequence::leaked(r.values, Alphabet::new(r.m)?)
    }
}

impl From<Sequence> for SequenceRepr {
    fn from(s: Sequence) -> Self {
        SequenceRepr {
            m: s.alphabet.m,
            values: s.values,
        }
    }
}

impl Sequence {
    /// A sequence of proper states (no removed points).
    pub fn new(values: Vec<State>, alphabet: Alphabet) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument(
                "sequence must have at least one point".into(),
            ));
        }
        if let Some((j, v)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| !alphabet.contains(v))
        {
            return Err(Error::Argument(format!(
                "value {v} at position {} is outside the {}-state alphabet",
                j + 1,
                alphabet.m
            )));
        }
        Ok(Sequence { alphabet, values })
    }

    /// A leaked copy, which may contain [`REMOVED`] points.
    pub fn leaked(values: Vec<State>, alphabet: Alphabet) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument(
                "sequence must have at least one point".into(),
            ));
        }
        if let Some((j, v)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| v != REMOVED && !alphabet.contains(v))
        {
            return Err(Error::Argument(format!(
                "value {v} at position {} is outside the {}-state alphabet",
                j + 1,
                alphabet.m
            )));
        }
        Ok(Sequence { alphabet, values })
    }

    pub(crate) fn from_parts_unchecked(values: Vec<State>, alphabet: Alphabet) -> Self {
        debug_assert!(!values.is_empty());
        Sequence { alphabet, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn values(&self) -> &[State] {
        &self.values
    }

    pub fn into_values(self) -> Vec<State> {
        self.values
    }

    pub fn has_removed(&self) -> bool {
        self.values.contains(&REMOVED)
    }
}

impl std::ops::Index<usize> for Sequence {
    type Output = State;
    fn index(&self, j: usize) -> &State {
        &self.values[j]
    }
}

/// Positions (0-based) and shared values where a copy deviates from the
/// original.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    #[serde(with = "one_based")]
    pub positions: Vec<usize>,
    pub values: Vec<State>,
}

impl Fingerprint {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, State)> + '_ {
        self.positions
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Check the record against the original it was derived from.
    pub fn validate(&self, original: &Sequence) -> Result<()> {
        if self.positions.len() != self.values.len() {
            return Err(Error::Dimension(format!(
                "{} positions but {} values",
                self.positions.len(),
                self.values.len()
            )));
        }
        let mut last = None;
        for (j, v) in self.iter() {
            if j >= original.len() {
                return Err(Error::Argument(format!(
                    "position {} outside sequence of length {}",
                    j + 1,
                    original.len()
                )));
            }
            if last.is_some_and(|prev| j <= prev) {
                return Err(Error::Argument(
                    "fingerprint positions must be strictly increasing".into(),
                ));
            }
            if !original.alphabet().contains(v) {
                return Err(Error::Argument(format!(
                    "fingerprint value {v} outside the alphabet"
                )));
            }
            if v == original[j] {
                return Err(Error::Argument(format!(
                    "position {} is recorded as fingerprinted but keeps the original value",
                    j + 1
                )));
            }
            last = Some(j);
        }
        Ok(())
    }
}

/// Everything needed to reproduce and later attribute one recipient's copy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintRecord {
    /// 1-based recipient index.
    pub sp_index: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub fingerprint: Fingerprint,
    /// Boneh-Shaw codeword number in `1..=c`, when codes are in use.
    pub codeword_index: Option<usize>,
}

impl FingerprintRecord {
    pub fn positions(&self) -> &[usize] {
        &self.fingerprint.positions
    }

    pub fn values(&self) -> &[State] {
        &self.fingerprint.values
    }

    pub fn count(&self) -> usize {
        self.fingerprint.len()
    }
}

/// Generator parameters shared by every copy in a ledger.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct FingerprintParams {
    p: f64,
    theta: f64,
    tau: f64,
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    p: f64,
    theta: f64,
    tau: f64,
    block_size: usize,
}

impl TryFrom<ParamsRepr> for FingerprintParams {
    type Error = Error;
    fn try_from(r: ParamsRepr) -> Result<Self> {
        let params = FingerprintParams::new(r.p, r.theta, r.tau)?;
        if params.block_size() != r.block_size {
            return Err(Error::Argument(format!(
                "block_size {} does not match ceil(1/p) = {}",
                r.block_size,
                params.block_size()
            )));
        }
        Ok(params)
    }
}

impl From<FingerprintParams> for ParamsRepr {
    fn from(p: FingerprintParams) -> Self {
        ParamsRepr {
            p: p.p,
            theta: p.theta,
            tau: p.tau,
            block_size: p.block_size(),
        }
    }
}

impl FingerprintParams {
    pub fn new(p: f64, theta: f64, tau: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Argument(format!(
                "fingerprinting probability must be in (0,1), got {p}"
            )));
        }
        if !(0.0..1.0).contains(&theta) {
            return Err(Error::Argument(format!(
                "theta must be in [0,1), got {theta}"
            )));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::Argument(format!(
                "tau must be a non-negative number, got {tau}"
            )));
        }
        Ok(FingerprintParams { p, theta, tau })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `ceil(1/p)` positions per rate-adjustment block.
    pub fn block_size(&self) -> usize {
        (1.0 / self.p).ceil() as usize
    }
}

pub const LEDGER_SCHEMA: &str = "corrfp-ledger/1";

/// The owner's private record of every copy shared so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharingLedger {
    schema: String,
    original: Sequence,
    params: FingerprintParams,
    code_layout: Option<CodeLayout>,
    records: Vec<FingerprintRecord>,
}

impl SharingLedger {
    pub fn new(original: Sequence, params: FingerprintParams) -> Result<Self> {
        if original.has_removed() {
            return Err(Error::Argument(
                "the original sequence cannot contain removed points".into(),
            ));
        }
        Ok(SharingLedger {
            schema: LEDGER_SCHEMA.into(),
            original,
            params,
            code_layout: None,
            records: Vec::new(),
        })
    }

    pub fn original(&self) -> &Sequence {
        &self.original
    }

    pub fn params(&self) -> &FingerprintParams {
        &self.params
    }

    pub fn code_layout(&self) -> Option<&CodeLayout> {
        self.code_layout.as_ref()
    }

    pub fn set_code_layout(&mut self, layout: CodeLayout) -> Result<()> {
        layout.validate(self.original.len())?;
        self.code_layout = Some(layout);
        Ok(())
    }

    pub fn records(&self) -> &[FingerprintRecord] {
        &self.records
    }

    pub fn num_recipients(&self) -> usize {
        self.records.len()
    }

    /// Append the next recipient's record. Its `sp_index` must be the next
    /// free index.
    pub fn push(&mut self, record: FingerprintRecord) -> Result<()> {
        let expected = self.records.len() + 1;
        if record.sp_index != expected {
            return Err(Error::Argument(format!(
                "expected a record for recipient {expected}, got {}",
                record.sp_index
            )));
        }
        record.fingerprint.validate(&self.original)?;
        self.records.push(record);
        Ok(())
    }

    /// Look up a recipient by its 1-based index.
    pub fn record(&self, sp_index: usize) -> Result<&FingerprintRecord> {
        sp_index
            .checked_sub(1)
            .and_then(|i| self.records.get(i))
            .ok_or(Error::UnknownRecipient(sp_index))
    }

    pub fn reconstruct_copy(&self, sp_index: usize) -> Result<Sequence> {
        reconstruct_copy(self, sp_index)
    }

    pub(crate) fn check_schema(&self) -> Result<()> {
        if self.schema != LEDGER_SCHEMA {
            return Err(Error::Argument(format!(
                "unsupported ledger schema {:?}, expected {LEDGER_SCHEMA:?}",
                self.schema
            )));
        }
        for r in &self.records {
            r.fingerprint.validate(&self.original)?;
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.sp_index != i + 1 {
                return Err(Error::Argument(format!(
                    "record {} carries sp_index {}",
                    i + 1,
                    r.sp_index
                )));
            }
        }
        if let Some(layout) = &self.code_layout {
            layout.validate(self.original.len())?;
        }
        Ok(())
    }
}

/// Rebuild the copy shared with `sp_index` from the original and its record.
pub fn reconstruct_copy(ledger: &SharingLedger, sp_index: usize) -> Result<Sequence> {
    let record = ledger.record(sp_index)?;
    Ok(apply_fingerprint(&ledger.original, &record.fingerprint))
}

pub(crate) fn apply_fingerprint(original: &Sequence, fp: &Fingerprint) -> Sequence {
    let mut values = original.values().to_vec();
    for (j, v) in fp.iter() {
        values[j] = v;
    }
    Sequence::from_parts_unchecked(values, original.alphabet())
}

/// Positions and values where `copy` differs from `original`.
pub fn diff_fingerprints(original: &Sequence, copy: &Sequence) -> Result<Fingerprint> {
    if original.len() != copy.len() {
        return Err(Error::Dimension(format!(
            "original has {} points, copy has {}",
            original.len(),
            copy.len()
        )));
    }
    if original.alphabet() != copy.alphabet() {
        return Err(Error::Dimension("sequences use different alphabets".into()));
    }
    let mut fp = Fingerprint::default();
    for (j, (&x, &y)) in original.values().iter().zip(copy.values()).enumerate() {
        if x != y {
            fp.positions.push(j);
            fp.values.push(y);
        }
    }
    Ok(fp)
}

/// Serialise 0-based positions as 1-based.
pub(crate) mod one_based {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(positions: &[usize], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(positions.iter().map(|&j| j + 1))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        let raw = Vec::<usize>::deserialize(d)?;
        raw.into_iter()
            .map(|j| {
                j.checked_sub(1)
                    .ok_or_else(|| D::Error::custom("positions are 1-based"))
            })
            .collect()
    }
}
