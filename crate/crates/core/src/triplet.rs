//! Batch diagonal estimation from a shared set of `(J, k, k′)` records, the text log that
//! stores them, and the pairwise sieve for large diagonal coefficients.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::Channel;
use crate::design::{sample_categorical, sample_design_state, normalize_probabilities, Design, DesignStateId};
use crate::error::{Error, Result};
use crate::estimator::{experiment_rng, Estimate, EstimatorConfig, Mode, Protocol, CAMPAIGN_SIEVE, CAMPAIGN_TRIPLETS};
use crate::mub::{commutation_vector_unchecked, mub_class, num_classes, LabelSolver, MubClass};
use crate::pauli::{check_dense, check_symbolic, mask, PauliLabel};
use crate::scalar::{c, Real};

/// One experiment record: base `J`, prepared label `k`, measured label `k′`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub base: u64,
    pub prepared: u64,
    pub measured: u64,
}

impl Triplet {
    /// `k ⊕ k′`.
    pub fn flip(&self) -> u64 {
        self.prepared ^ self.measured
    }
}

/// Triplets on a fixed register size, validated against it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletSet {
    n: usize,
    triplets: Vec<Triplet>,
}

impl TripletSet {
    pub fn new(n: usize, triplets: Vec<Triplet>) -> Result<Self> {
        check_symbolic(n)?;
        let classes = num_classes(n);
        for (i, t) in triplets.iter().enumerate() {
            if t.base >= classes || (t.prepared | t.measured) & !mask(n) != 0 {
                return Err(Error::InvalidDesignState(format!("triplet {i} does not fit n = {n}: {t:?}")));
            }
        }
        Ok(TripletSet { n, triplets })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Number of distinct bases present.
    pub fn distinct_bases(&self) -> usize {
        let mut bases: Vec<u64> = self.triplets.iter().map(|t| t.base).collect();
        bases.sort_unstable();
        bases.dedup();
        bases.len()
    }
}

/// Prepare a random design state, apply the channel, measure in the same base. Always sampled.
pub fn run_triplet_experiments<T: Real>(channel: &Channel<T>, cfg: &EstimatorConfig) -> Result<TripletSet> {
    if cfg.mode != Mode::Sampled {
        return Err(Error::InvalidConfig("triplet experiments are always sampled".into()));
    }
    let n = channel.num_qubits();
    check_dense(n)?;
    let m = cfg.experiments(Protocol::Fidelity)?;
    let design = Design::<T>::new(n)?;
    let kraus = channel.kraus()?;

    let draws: Vec<(DesignStateId, f64)> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = experiment_rng(cfg.seed, CAMPAIGN_TRIPLETS, i);
            let id = sample_design_state(n, &mut rng)?;
            Ok((id, rng.random::<f64>()))
        })
        .collect::<Result<_>>()?;

    let mut unique: Vec<DesignStateId> = draws.iter().map(|(id, _)| *id).collect();
    unique.sort_unstable();
    unique.dedup();
    let table: HashMap<DesignStateId, Vec<f64>> = unique
        .into_par_iter()
        .map(|id| {
            let basis = design.basis(id.base())?;
            let psi = DVector::from_column_slice(basis.state(id.k()));
            let proj = basis.states().adjoint();
            let mut probs = vec![0.0; 1 << n];
            for a in kraus.operators() {
                let amps = &proj * (a * &psi);
                for (p, v) in probs.iter_mut().zip(amps.iter()) {
                    *p += v.norm_sqr().as_f64();
                }
            }
            normalize_probabilities(&mut probs)?;
            Ok((id, probs))
        })
        .collect::<Result<_>>()?;

    let triplets = draws
        .iter()
        .map(|(id, u)| Triplet {
            base: id.base(),
            prepared: id.k(),
            measured: sample_categorical(&table[id], *u) as u64,
        })
        .collect();
    Ok(TripletSet { n, triplets })
}

/// Flip patterns per base with multiplicities; everything downstream only needs these.
struct Grouped {
    n: usize,
    total: usize,
    bases: Vec<(MubClass, BTreeMap<u64, u64>)>,
}

impl Grouped {
    fn new(set: &TripletSet) -> Result<Self> {
        let mut by_base: BTreeMap<u64, BTreeMap<u64, u64>> = BTreeMap::new();
        for t in &set.triplets {
            *by_base.entry(t.base).or_default().entry(t.flip()).or_default() += 1;
        }
        let bases = by_base
            .into_iter()
            .map(|(j, flips)| Ok((mub_class(set.n, j)?, flips)))
            .collect::<Result<_>>()?;
        Ok(Grouped { n: set.n, total: set.len(), bases })
    }

    /// Number of `m`-type events.
    fn hits(&self, m: &PauliLabel) -> u64 {
        self.bases
            .iter()
            .map(|(class, flips)| flips.get(&commutation_vector_unchecked(m, class).bits()).copied().unwrap_or(0))
            .sum()
    }

    fn estimate(&self, m: &PauliLabel) -> Estimate<f64> {
        diag_estimate(self.hits(m), self.total, self.n)
    }
}

fn diag_estimate(hits: u64, total: usize, n: usize) -> Estimate<f64> {
    let d = (1u64 << n) as f64;
    let mf = total as f64;
    let f = hits as f64 / mf;
    let se = if total > 1 { (f * (1.0 - f) / (mf - 1.0)).sqrt() } else { 0.0 };
    Estimate {
        value: c(((d + 1.0) * f - 1.0) / d, 0.0),
        std_error_re: se * (d + 1.0) / d,
        std_error_im: 0.0,
        observable: c(f, 0.0),
        experiments: total,
        dim: 1usize.checked_shl(n as u32).unwrap_or(0),
    }
}

/// `χ̂_mm` from the fraction of triplets with `k ⊕ k′` equal to the commutation vector of `m`
/// with the triplet's class.
pub fn estimate_diag_from_triplets(set: &TripletSet, m: &PauliLabel) -> Result<Estimate<f64>> {
    if set.is_empty() {
        return Err(Error::EmptyInput("triplet list"));
    }
    if m.num_qubits() != set.n {
        return Err(Error::QubitMismatch(set.n, m.num_qubits()));
    }
    Ok(Grouped::new(set)?.estimate(m))
}

/// Exhaustive pair processing up to this many triplets.
pub const SIEVE_EXHAUSTIVE_LIMIT: usize = 5000;

/// Pairs drawn when the input is larger than [`SIEVE_EXHAUSTIVE_LIMIT`].
pub const SIEVE_PAIR_SAMPLE: u64 = 12_500_000;

#[derive(Debug, Clone)]
pub struct SieveOutcome {
    /// Labels whose estimate exceeds the threshold, largest first.
    pub hits: Vec<(PauliLabel, Estimate<f64>)>,
    /// Cross-base triplet pairs that fed the candidate stage.
    pub pairs_processed: u64,
    /// `M (M + 1) / 2`.
    pub pair_bound: u64,
    pub subsampled: bool,
    /// Distinct candidate labels before thresholding.
    pub candidates: usize,
}

/// Every cross-base pair of triplets pins down one label; each distinct label is then
/// estimated from the full set and kept if its estimate exceeds `threshold`.
pub fn sieve_large_diagonals(set: &TripletSet, threshold: f64) -> Result<SieveOutcome> {
    if set.is_empty() {
        return Err(Error::EmptyInput("triplet list"));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidConfig(format!("threshold must be positive, got {threshold}")));
    }
    let grouped = Grouped::new(set)?;
    if grouped.bases.len() < 2 {
        return Err(Error::SingleBase);
    }
    let m = set.len() as u64;
    let pair_bound = m * (m + 1) / 2;
    let subsampled = set.len() > SIEVE_EXHAUSTIVE_LIMIT;

    let (tally, pairs_processed) = if subsampled {
        log::info!("sieve: {m} triplets, sampling {SIEVE_PAIR_SAMPLE} of {pair_bound} pairs");
        sampled_tally(set)?
    } else {
        exhaustive_tally(&grouped)?
    };

    let mut hits: Vec<(PauliLabel, Estimate<f64>)> = tally
        .keys()
        .copied()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|label| (label, grouped.estimate(&label)))
        .filter(|(_, e)| e.value.re > threshold)
        .collect();
    hits.sort_by(|a, b| b.1.value.re.total_cmp(&a.1.value.re).then_with(|| a.0.index().cmp(&b.0.index())));
    Ok(SieveOutcome { hits, pairs_processed, pair_bound, subsampled, candidates: tally.len() })
}

type Tally = HashMap<PauliLabel, u64>;

fn merge(mut a: Tally, b: Tally) -> Tally {
    for (k, v) in b {
        *a.entry(k).or_default() += v;
    }
    a
}

fn exhaustive_tally(grouped: &Grouped) -> Result<(Tally, u64)> {
    let nb = grouped.bases.len();
    let pairs: Vec<(usize, usize)> = (0..nb).flat_map(|a| (a + 1..nb).map(move |b| (a, b))).collect();
    let partial: Vec<(Tally, u64)> = pairs
        .into_par_iter()
        .map(|(a, b)| {
            let (ca, fa) = &grouped.bases[a];
            let (cb, fb) = &grouped.bases[b];
            let solver = LabelSolver::new(ca, cb)?;
            let mut tally = Tally::new();
            let mut count = 0;
            for (pa, wa) in fa {
                for (pb, wb) in fb {
                    *tally.entry(solver.solve_bits(*pa, *pb)).or_default() += wa * wb;
                    count += wa * wb;
                }
            }
            Ok((tally, count))
        })
        .collect::<Result<_>>()?;
    Ok(partial.into_iter().fold((Tally::new(), 0), |(t, n), (pt, pn)| (merge(t, pt), n + pn)))
}

fn sampled_tally(set: &TripletSet) -> Result<(Tally, u64)> {
    const CHUNK: u64 = 1 << 16;
    let m = set.len() as u64;
    let chunks = SIEVE_PAIR_SAMPLE.div_ceil(CHUNK);
    let partial: Vec<(Tally, u64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = experiment_rng(0, CAMPAIGN_SIEVE, chunk);
            let quota = CHUNK.min(SIEVE_PAIR_SAMPLE - chunk * CHUNK);
            let mut solvers: HashMap<(u64, u64), LabelSolver> = HashMap::new();
            let mut tally = Tally::new();
            let mut count = 0;
            for _ in 0..quota {
                let i = rng.random_range(0..m);
                let j = rng.random_range(0..m);
                let (ti, tj) = (set.triplets[i as usize], set.triplets[j as usize]);
                if i >= j || ti.base == tj.base {
                    continue;
                }
                let solver = match solvers.entry((ti.base, tj.base)) {
                    std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(LabelSolver::new(&mub_class(set.n, ti.base)?, &mub_class(set.n, tj.base)?)?)
                    }
                };
                *tally.entry(solver.solve_bits(ti.flip(), tj.flip())).or_default() += 1;
                count += 1;
            }
            Ok((tally, count))
        })
        .collect::<Result<_>>()?;
    Ok(partial.into_iter().fold((Tally::new(), 0), |(t, n), (pt, pn)| (merge(t, pt), n + pn)))
}

/// Header fields of a triplet log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogHeader {
    pub n: usize,
    pub seed: u64,
    pub experiments: usize,
    pub channel_sha256: String,
}

pub const LOG_MAGIC: &str = "# seqpt-triplets v1";

fn bits_to_string(bits: u64, n: usize) -> String {
    (0..n).map(|i| if bits >> i & 1 == 1 { '1' } else { '0' }).collect()
}

fn string_to_bits(s: &str, n: usize) -> Option<u64> {
    if s.len() != n {
        return None;
    }
    s.bytes().enumerate().try_fold(0u64, |acc, (i, b)| match b {
        b'0' => Some(acc),
        b'1' => Some(acc | 1 << i),
        _ => None,
    })
}

/// Renders the whole log; character `i` of each bit string is bit `i` of the label.
pub fn format_log(header: &LogHeader, set: &TripletSet) -> String {
    let mut out = format!(
        "{LOG_MAGIC} n={} seed={} M={} channel={}\n",
        header.n, header.seed, header.experiments, header.channel_sha256
    );
    for t in &set.triplets {
        let _ = writeln!(out, "{}\t{}\t{}", t.base, bits_to_string(t.prepared, set.n), bits_to_string(t.measured, set.n));
    }
    out
}

pub fn write_log<W: Write>(mut w: W, header: &LogHeader, set: &TripletSet) -> Result<()> {
    w.write_all(format_log(header, set).as_bytes())?;
    w.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Result<LogHeader> {
    let bad = || Error::MalformedLog(format!("bad header `{line}`"));
    let rest = line.strip_prefix(LOG_MAGIC).ok_or_else(bad)?;
    let mut fields = HashMap::new();
    for token in rest.split_whitespace() {
        let (k, v) = token.split_once('=').ok_or_else(bad)?;
        if fields.insert(k, v).is_some() {
            return Err(bad());
        }
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| Error::MalformedLog(format!("header lacks `{k}`")));
    let n: usize = get("n")?.parse().map_err(|_| bad())?;
    check_symbolic(n).map_err(|e| Error::MalformedLog(e.to_string()))?;
    let hash = get("channel")?;
    if hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(Error::MalformedLog(format!("channel hash `{hash}` is not sha256 hex")));
    }
    Ok(LogHeader {
        n,
        seed: get("seed")?.parse().map_err(|_| bad())?,
        experiments: get("M")?.parse().map_err(|_| bad())?,
        channel_sha256: hash.to_ascii_lowercase(),
    })
}

/// Parses and validates a log; the record count must match the header.
pub fn read_log<R: BufRead>(reader: R) -> Result<(LogHeader, TripletSet)> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => parse_header(line?.trim_end())?,
        None => return Err(Error::MalformedLog("empty log".into())),
    };
    let n = header.n;
    let classes = num_classes(n);
    let mut triplets = Vec::with_capacity(header.experiments.min(1 << 24));
    for (i, line) in lines {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let bad = || Error::MalformedLog(format!("line {}: `{line}`", i + 1));
        let mut parts = line.split('\t');
        let (Some(j), Some(k), Some(k2), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let base: u64 = j.parse().map_err(|_| bad())?;
        if base >= classes {
            return Err(bad());
        }
        let prepared = string_to_bits(k, n).ok_or_else(bad)?;
        let measured = string_to_bits(k2, n).ok_or_else(bad)?;
        triplets.push(Triplet { base, prepared, measured });
    }
    if triplets.len() != header.experiments {
        return Err(Error::MalformedLog(format!(
            "header announces {} triplets, found {}",
            header.experiments,
            triplets.len()
        )));
    }
    Ok((header, TripletSet { n, triplets }))
}

pub fn parse_log(text: &str) -> Result<(LogHeader, TripletSet)> {
    read_log(text.as_bytes())
}
