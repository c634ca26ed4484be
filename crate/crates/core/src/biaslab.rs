//! Desk-scale laboratory for training-data biases of learned metrics.
//!
//! A linear regressor over hashed character n-grams is trained on synthetic
//! human-judgement data. Two experiments show that the learned scorer tracks
//! the training score distribution of a translation direction, and that a
//! domain tag seen at training time can steer test-time scores.

use std::fmt::Write as _;
use std::hash::Hasher;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use twox_hash::XxHash64;

use crate::error::{Error, Result};
use crate::evalset::Direction;

/// Experiment knobs. None of these are claims about real data.
#[derive(Debug, Clone, PartialEq)]
pub struct LabConfig {
    /// Corruption rate is `(1 - quality) * corruption_scale`.
    pub corruption_scale: f64,
    /// Gold DA slope in latent quality.
    pub da_slope: f64,
    /// Standard deviation of gold DA noise.
    pub da_noise_sd: f64,
    /// Inclusive reference length range, in characters.
    pub ref_len: (usize, usize),
    pub dim_log2: u32,
    pub hash_seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub train_per_direction: usize,
    pub test_per_direction: usize,
    pub filter_fraction: f64,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            corruption_scale: 0.5,
            da_slope: 0.3,
            da_noise_sd: 0.05,
            ref_len: (20, 40),
            dim_log2: 18,
            hash_seed: 0x5eed,
            epochs: 12,
            learning_rate: 0.002,
            train_per_direction: 1200,
            test_per_direction: 400,
            filter_fraction: 0.75,
        }
    }
}

/// Mean human DA per direction, used as synthetic priors.
pub const DIRECTION_PRIORS: &[(&str, &str, f64)] = &[
    ("en", "de", 0.841),
    ("en", "zh", 0.775),
    ("en", "ru", 0.765),
    ("en", "cs", 0.767),
    ("en", "ja", 0.745),
    ("en", "gu", 0.514),
    ("en", "kk", 0.574),
    ("hi", "bn", 0.910),
    ("bn", "hi", 0.770),
    ("de", "fr", 0.792),
    ("fr", "de", 0.834),
    ("de", "cs", 0.510),
];

pub fn direction_prior(direction: &Direction) -> Option<f64> {
    DIRECTION_PRIORS
        .iter()
        .find(|(s, t, _)| *s == direction.src_lang() && *t == direction.tgt_lang())
        .map(|&(_, _, m)| m)
}

/// Training-subset means per year tag, and the test-time tag sweep.
pub const TAG_TRAIN_MEANS: &[(u16, f64)] = &[(2019, 0.721), (2020, 0.735), (2021, 0.749)];
pub const TAG_SWEEP: std::ops::RangeInclusive<u16> = 2018..=2025;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthExample {
    pub direction: Direction,
    pub source: String,
    pub hypothesis: String,
    pub reference: String,
    pub tag: Option<String>,
    pub gold_da: f64,
    pub quality: f64,
}

fn alphabet(lang: &str) -> Vec<char> {
    let mut chars: Vec<char> = match lang {
        "zh" | "ja" => "的一是不了人我在有他这中大来上国个到说们为子和你地出道也时年得就那要下以生会自着去之过家学对可里后小么心多天而能好都然没日于起还发成事只作当想看文无开手十用主行方又如前所本见经头面公同三已老从动两长知民样现分将外但身些与高意进把法此实回二理美点月明其种声全工己话儿者向情部正名定女问力机给等几很业最间新什打便位因重被走电四第门相次东政海口使教西再平真听世气信北少关并内加化由却代军产入先山五太水万市眼体别处总才场师书比住员九笑性通目华报立马命张活难神数件安表原车白应路期叫死常提感金何更反合放做系计或司利受光王果亲界及今京务制解各任至清物台象记边共风战干接它许八特觉望直服毛林题建南度统色字请交爱让认算论百吃义科怎元社术结六功指思非流每青管夫连远资队跟带花快条院变联言权往展该领传近留红治决周保达办运武半候七必城父强步完革深区即求品士转量空甚众技轻程告江语英基派满式李息写呢识极令黄德收脸钱党倒未持取设始版双历越史商千片容研像找友孩站广改议形委早房音火际则首单据导影失拿网香似斯专石若兵弟谁校读志飞观争究包组造落视济喜离虽坐集编宝谈府拉黑且随格尽剑讲布杀微怕母调局根曾准团段终乐切级克精哪官示冷域读".chars().collect(),
        "ru" | "uk" | "kk" => "абвгдежзийклмнопрстуфхцчшщъыьэюя".chars().collect(),
        "de" => "abcdefghijklmnopqrstuvwxyzäöüß".chars().collect(),
        "cs" => "abcdefghijklmnopqrstuvwxyzáčďéěíňóřšťúůýž".chars().collect(),
        "fr" => "abcdefghijklmnopqrstuvwxyzàâçéèêëîïôûùüÿœ".chars().collect(),
        "gu" => "અઆઇઈઉઊએઐઓઔકખગઘચછજઝટઠડઢણતથદધનપફબભમયરલવશષસહ".chars().collect(),
        "hi" => "अआइईउऊएऐओऔकखगघचछजझटठडढणतथदधनपफबभमयरलवशषसह".chars().collect(),
        "bn" => "অআইঈউঊএঐওঔকখগঘচছজঝটঠডঢণতথদধনপফবভমযরলশষসহ".chars().collect(),
        _ => "abcdefghijklmnopqrstuvwxyz".chars().collect(),
    };
    chars.sort_unstable();
    chars.dedup();
    chars
}

fn random_text(rng: &mut ChaCha8Rng, alphabet: &[char], len: usize) -> String {
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.15) {
                ' '
            } else {
                alphabet[rng.gen_range(0..alphabet.len())]
            }
        })
        .collect()
}

/// Substitution/deletion noise, each character corrupted with probability `rate`.
fn corrupt(rng: &mut ChaCha8Rng, text: &str, alphabet: &[char], rate: f64) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if rate > 0.0 && rng.gen_bool(rate.min(1.0)) {
            if rng.gen_bool(0.5) {
                out.push(alphabet[rng.gen_range(0..alphabet.len())]);
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Deterministic synthetic DA data: `n_per_direction` examples per direction.
pub fn generate_synth(
    directions: &[(Direction, f64)],
    n_per_direction: usize,
    seed: u64,
    config: &LabConfig,
) -> Result<Vec<SynthExample>> {
    for (d, mean) in directions {
        if !(0.0..=1.0).contains(mean) {
            return Err(Error::InvalidArgument(format!(
                "mean DA for {d} must be in [0, 1], got {mean}"
            )));
        }
    }
    let (lo, hi) = config.ref_len;
    if lo == 0 || lo > hi {
        return Err(Error::InvalidArgument(format!("bad reference length range {lo}..={hi}")));
    }
    let noise = Normal::new(0.0, config.da_noise_sd)
        .map_err(|e| Error::InvalidArgument(format!("DA noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(directions.len() * n_per_direction);
    for (direction, mean) in directions {
        let tgt_alpha = alphabet(direction.tgt_lang());
        let src_alpha = alphabet(direction.src_lang());
        for _ in 0..n_per_direction {
            let quality: f64 = rng.gen();
            let len = rng.gen_range(lo..=hi);
            let source = random_text(&mut rng, &src_alpha, len);
            let reference = random_text(&mut rng, &tgt_alpha, len);
            let rate = (1.0 - quality) * config.corruption_scale;
            let hypothesis = corrupt(&mut rng, &reference, &tgt_alpha, rate);
            let eps: f64 = noise.sample(&mut rng);
            let gold_da = (mean + config.da_slope * (quality - 0.5) + eps).clamp(0.0, 1.0);
            out.push(SynthExample {
                direction: direction.clone(),
                source,
                hypothesis,
                reference,
                tag: None,
                gold_da,
                quality,
            });
        }
    }
    Ok(out)
}

/// Sparse feature vector: `(index, value)` sorted by index, no duplicates.
pub type SparseVec = Vec<(u32, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hashing {
    pub dim_log2: u32,
    pub seed: u64,
}

impl Hashing {
    pub fn dim(&self) -> usize {
        1usize << self.dim_log2
    }

    pub fn index(&self, namespace: &str, item: &str) -> u32 {
        let mut h = XxHash64::with_seed(self.seed);
        h.write(namespace.as_bytes());
        h.write_u8(0xff);
        h.write(item.as_bytes());
        (h.finish() & (self.dim() as u64 - 1)) as u32
    }
}

pub const NGRAM_ORDERS: std::ops::RangeInclusive<usize> = 1..=3;

fn add_ngrams(hashing: &Hashing, namespace: &str, text: &str, out: &mut Vec<(u32, f64)>) {
    let chars: Vec<char> = text.chars().collect();
    let mut buf = String::new();
    for n in NGRAM_ORDERS {
        for w in chars.windows(n) {
            buf.clear();
            buf.extend(w);
            out.push((hashing.index(namespace, &buf), 1.0));
        }
    }
}

fn merge_sparse(mut raw: Vec<(u32, f64)>) -> SparseVec {
    raw.sort_by_key(|&(i, _)| i);
    let mut out: SparseVec = Vec::with_capacity(raw.len());
    for (i, v) in raw {
        match out.last_mut() {
            Some((j, acc)) if *j == i => *acc += v,
            _ => out.push((i, v)),
        }
    }
    out
}

/// Hashed counts of hypothesis and reference n-grams (separate namespaces),
/// one direction token, and one tag token when present.
pub fn featurize(example: &SynthExample, hashing: &Hashing) -> SparseVec {
    let mut raw = Vec::new();
    add_ngrams(hashing, "hyp", &example.hypothesis, &mut raw);
    add_ngrams(hashing, "ref", &example.reference, &mut raw);
    raw.push((hashing.index("dir", &example.direction.to_string()), 1.0));
    if let Some(tag) = &example.tag {
        raw.push((tag_index(hashing, tag), 1.0));
    }
    merge_sparse(raw)
}

pub fn tag_index(hashing: &Hashing, tag: &str) -> u32 {
    hashing.index("tag", tag)
}

/// Linear regressor over hashed features.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyScorer {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hashing: Hashing,
    /// Mean squared-error loss after each training epoch.
    pub loss_history: Vec<f64>,
}

impl ToyScorer {
    pub fn zeros(hashing: Hashing) -> Self {
        ToyScorer {
            weights: vec![0.0; hashing.dim()],
            bias: 0.0,
            hashing,
            loss_history: Vec::new(),
        }
    }

    /// The non-bias term `w · x`.
    pub fn dot(&self, x: &[(u32, f64)]) -> f64 {
        x.iter().map(|&(i, v)| self.weights[i as usize] * v).sum()
    }

    pub fn predict_features(&self, x: &[(u32, f64)]) -> f64 {
        self.bias + self.dot(x)
    }

    pub fn predict(&self, example: &SynthExample) -> f64 {
        self.predict_features(&featurize(example, &self.hashing))
    }

    /// `½ Σ (prediction − gold)²` over a batch.
    pub fn batch_loss(&self, xs: &[SparseVec], ys: &[f64]) -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, y)| 0.5 * (self.predict_features(x) - y).powi(2))
            .sum()
    }

    /// Gradient of [`ToyScorer::batch_loss`]: `(weight gradient, bias gradient)`.
    pub fn batch_gradient(&self, xs: &[SparseVec], ys: &[f64]) -> (SparseVec, f64) {
        let mut raw = Vec::new();
        let mut bias_grad = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let residual = self.predict_features(x) - y;
            bias_grad += residual;
            raw.extend(x.iter().map(|&(i, v)| (i, residual * v)));
        }
        (merge_sparse(raw), bias_grad)
    }

    fn sgd_step(&mut self, x: &[(u32, f64)], y: f64, lr: f64) -> f64 {
        let residual = self.predict_features(x) - y;
        for &(i, v) in x {
            self.weights[i as usize] -= lr * residual * v;
        }
        self.bias -= lr * residual;
        residual * residual
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub hashing: Hashing,
}

impl TrainConfig {
    pub fn from_lab(config: &LabConfig, seed: u64) -> Self {
        TrainConfig {
            epochs: config.epochs,
            learning_rate: config.learning_rate,
            seed,
            hashing: Hashing {
                dim_log2: config.dim_log2,
                seed: config.hash_seed,
            },
        }
    }
}

/// Plain SGD on squared error with a seeded shuffle each epoch. Weights start
/// at zero and the bias at the mean gold score, so feature weights (tags
/// included) learn deviations from the training mean.
pub fn train(dataset: &[SynthExample], config: &TrainConfig) -> Result<ToyScorer> {
    if dataset.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {}",
            config.learning_rate
        )));
    }
    let xs: Vec<SparseVec> = dataset.iter().map(|e| featurize(e, &config.hashing)).collect();
    let mut scorer = ToyScorer::zeros(config.hashing);
    scorer.bias = dataset.iter().map(|e| e.gold_da).sum::<f64>() / dataset.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            scorer.sgd_step(&xs[i], dataset[i].gold_da, config.learning_rate);
        }
        let mse = xs
            .iter()
            .zip(dataset)
            .map(|(x, e)| (scorer.predict_features(x) - e.gold_da).powi(2))
            .sum::<f64>()
            / dataset.len() as f64;
        if !mse.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "training diverged (learning rate {} too large?)",
                config.learning_rate
            )));
        }
        scorer.loss_history.push(mse);
    }
    Ok(scorer)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    Top,
    Bottom,
}

/// Keeps the top or bottom `fraction` of `direction`'s examples by gold DA
/// (ties broken by original position). Other directions pass through.
pub fn filter_fraction(
    dataset: &[SynthExample],
    direction: &Direction,
    keep: Keep,
    fraction: f64,
) -> Result<Vec<SynthExample>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let mut idx: Vec<usize> = (0..dataset.len())
        .filter(|&i| &dataset[i].direction == direction)
        .collect();
    if idx.is_empty() {
        return Err(Error::InvalidArgument(format!("direction {direction} not in dataset")));
    }
    idx.sort_by(|&a, &b| {
        dataset[a]
            .gold_da
            .total_cmp(&dataset[b].gold_da)
            .then(a.cmp(&b))
    });
    let n_keep = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len());
    let kept: Vec<usize> = match keep {
        Keep::Bottom => idx[..n_keep].to_vec(),
        Keep::Top => idx[idx.len() - n_keep..].to_vec(),
    };
    let mut keep_mask = vec![true; dataset.len()];
    for &i in &idx {
        keep_mask[i] = false;
    }
    for i in kept {
        keep_mask[i] = true;
    }
    Ok(dataset
        .iter()
        .zip(keep_mask)
        .filter_map(|(e, k)| k.then(|| e.clone()))
        .collect())
}

fn mean_prediction(scorer: &ToyScorer, examples: &[SynthExample]) -> f64 {
    examples.iter().map(|e| scorer.predict(e)).sum::<f64>() / examples.len() as f64
}

/// Mean test score per direction for scorers trained on altered data.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionBiasReport {
    pub seed: u64,
    pub directions: [Direction; 2],
    /// `(training data label, [mean score on A, mean score on B])`; the
    /// first row is the unfiltered baseline.
    pub rows: Vec<(String, [f64; 2])>,
}

impl DistributionBiasReport {
    fn row(&self, label: &str) -> [f64; 2] {
        self.rows
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| *v)
            .expect("row label present")
    }

    pub fn baseline(&self) -> [f64; 2] {
        self.rows[0].1
    }

    /// `[shift on A, shift on B]` of a row relative to the baseline.
    pub fn shift(&self, label: &str) -> [f64; 2] {
        let base = self.baseline();
        let r = self.row(label);
        [r[0] - base[0], r[1] - base[1]]
    }

    pub fn label(keep: Keep, direction: &Direction) -> String {
        match keep {
            Keep::Top => format!("top-75% of {direction}"),
            Keep::Bottom => format!("bot-75% of {direction}"),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# seed={}\ntraining_data\t{}\t{}\n",
            self.seed, self.directions[0], self.directions[1]
        );
        for (label, v) in &self.rows {
            writeln!(out, "{label}\t{:.6}\t{:.6}", v[0], v[1]).unwrap();
        }
        out
    }
}

/// Trains on all data, then on the top/bottom 75% of each of two directions,
/// and scores one fixed test set with every model.
pub fn distribution_bias_experiment(seed: u64, config: &LabConfig) -> Result<DistributionBiasReport> {
    let a = Direction::new("en", "de")?;
    let b = Direction::new("en", "zh")?;
    let dirs = [
        (a.clone(), direction_prior(&a).unwrap_or(0.8)),
        (b.clone(), direction_prior(&b).unwrap_or(0.8)),
    ];
    let train_set = generate_synth(&dirs, config.train_per_direction, seed, config)?;
    let test_set = generate_synth(
        &dirs,
        config.test_per_direction,
        seed ^ 0x7e57_7e57_7e57_7e57,
        config,
    )?;
    let test_a: Vec<SynthExample> = test_set.iter().filter(|e| e.direction == a).cloned().collect();
    let test_b: Vec<SynthExample> = test_set.iter().filter(|e| e.direction == b).cloned().collect();

    let train_cfg = TrainConfig::from_lab(config, seed);
    let eval = |data: &[SynthExample]| -> Result<[f64; 2]> {
        let scorer = train(data, &train_cfg)?;
        Ok([mean_prediction(&scorer, &test_a), mean_prediction(&scorer, &test_b)])
    };

    let mut rows = vec![("all".to_string(), eval(&train_set)?)];
    for d in [&a, &b] {
        for keep in [Keep::Top, Keep::Bottom] {
            let filtered = filter_fraction(&train_set, d, keep, config.filter_fraction)?;
            rows.push((DistributionBiasReport::label(keep, d), eval(&filtered)?));
        }
    }
    Ok(DistributionBiasReport {
        seed,
        directions: [a, b],
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagRow {
    pub tag: u16,
    /// Mean gold DA of the training subset with this tag; `None` if unseen.
    pub train_mean: Option<f64>,
    /// Mean prediction on the whole test set carrying this tag.
    pub test_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagBiasReport {
    pub seed: u64,
    pub rows: Vec<TagRow>,
}

impl TagBiasReport {
    pub fn test_mean(&self, tag: u16) -> Option<f64> {
        self.rows.iter().find(|r| r.tag == tag).map(|r| r.test_mean)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("# seed={}\ntag\ttrain\ttest\n", self.seed);
        for r in &self.rows {
            let train = r
                .train_mean
                .map_or("unseen".to_string(), |m| format!("{m:.6}"));
            writeln!(out, "{}\t{}\t{:.6}", r.tag, train, r.test_mean).unwrap();
        }
        out
    }
}

/// Picks a hash seed under which all sweep tags get distinct feature indices.
fn collision_free_hashing(config: &LabConfig) -> Hashing {
    let mut hashing = Hashing {
        dim_log2: config.dim_log2,
        seed: config.hash_seed,
    };
    loop {
        let mut idx: Vec<u32> = TAG_SWEEP
            .map(|t| tag_index(&hashing, &t.to_string()))
            .collect();
        idx.sort_unstable();
        idx.dedup();
        if idx.len() == TAG_SWEEP.count() {
            return hashing;
        }
        log::warn!("tag feature collision under hash seed {}; retrying", hashing.seed);
        hashing.seed = hashing.seed.wrapping_add(1);
    }
}

/// Trains on year-tagged data whose gold scores improve with the year, then
/// scores one untagged test set once per tag in the sweep.
pub fn tag_bias_experiment(seed: u64, config: &LabConfig) -> Result<TagBiasReport> {
    let direction = Direction::new("en", "de")?;
    let hashing = collision_free_hashing(config);
    let mut train_set = Vec::new();
    let mut train_means = Vec::new();
    for (k, &(tag, mean)) in TAG_TRAIN_MEANS.iter().enumerate() {
        let mut part = generate_synth(
            &[(direction.clone(), mean)],
            config.train_per_direction,
            seed.wrapping_mul(31).wrapping_add(k as u64 + 1),
            config,
        )?;
        for e in &mut part {
            e.tag = Some(tag.to_string());
        }
        let m = part.iter().map(|e| e.gold_da).sum::<f64>() / part.len() as f64;
        train_means.push((tag, m));
        train_set.extend(part);
    }
    let base = TAG_TRAIN_MEANS.iter().map(|&(_, m)| m).sum::<f64>() / TAG_TRAIN_MEANS.len() as f64;
    let test_set = generate_synth(
        &[(direction, base)],
        config.test_per_direction,
        seed ^ 0x7a67_7a67_7a67_7a67,
        config,
    )?;

    let mut train_cfg = TrainConfig::from_lab(config, seed);
    train_cfg.hashing = hashing;
    let scorer = train(&train_set, &train_cfg)?;

    let rows = TAG_SWEEP
        .map(|tag| {
            let tagged: Vec<SynthExample> = test_set
                .iter()
                .map(|e| SynthExample {
                    tag: Some(tag.to_string()),
                    ..e.clone()
                })
                .collect();
            TagRow {
                tag,
                train_mean: train_means.iter().find(|(t, _)| *t == tag).map(|&(_, m)| m),
                test_mean: mean_prediction(&scorer, &tagged),
            }
        })
        .collect();
    Ok(TagBiasReport { seed, rows })
}

/// Whether the qualitative distribution-bias pattern held across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSummary {
    pub seeds: usize,
    pub top_raises_a: usize,
    pub bottom_lowers_a: usize,
    pub mean_abs_shift_a: f64,
    pub mean_abs_shift_b: f64,
}

impl DistributionSummary {
    pub fn from_reports(reports: &[DistributionBiasReport]) -> Self {
        let mut s = DistributionSummary {
            seeds: reports.len(),
            top_raises_a: 0,
            bottom_lowers_a: 0,
            mean_abs_shift_a: 0.0,
            mean_abs_shift_b: 0.0,
        };
        for r in reports {
            let a = &r.directions[0];
            let top = r.shift(&DistributionBiasReport::label(Keep::Top, a));
            let bot = r.shift(&DistributionBiasReport::label(Keep::Bottom, a));
            s.top_raises_a += usize::from(top[0] > 0.0);
            s.bottom_lowers_a += usize::from(bot[0] < 0.0);
            s.mean_abs_shift_a += (top[0].abs() + bot[0].abs()) / 2.0;
            s.mean_abs_shift_b += (top[1].abs() + bot[1].abs()) / 2.0;
        }
        if !reports.is_empty() {
            s.mean_abs_shift_a /= reports.len() as f64;
            s.mean_abs_shift_b /= reports.len() as f64;
        }
        s
    }

    pub fn to_text(&self) -> String {
        format!(
            "top-75% of A raises A: {}/{} seeds\n\
             bot-75% of A lowers A: {}/{} seeds\n\
             mean |shift| on A: {:.6}, on B: {:.6} (B below half of A: {})\n",
            self.top_raises_a,
            self.seeds,
            self.bottom_lowers_a,
            self.seeds,
            self.mean_abs_shift_a,
            self.mean_abs_shift_b,
            if self.mean_abs_shift_b < 0.5 * self.mean_abs_shift_a { "yes" } else { "no" }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagSummary {
    pub seeds: usize,
    pub monotone_seen: usize,
    pub unseen_above_first: usize,
    pub mean_by_tag: Vec<(u16, f64)>,
}

impl TagSummary {
    pub fn from_reports(reports: &[TagBiasReport]) -> Self {
        let seen: Vec<u16> = TAG_TRAIN_MEANS.iter().map(|&(t, _)| t).collect();
        let first = seen[0];
        let mut monotone_seen = 0;
        let mut unseen_above_first = 0;
        for r in reports {
            let means: Vec<f64> = seen.iter().filter_map(|&t| r.test_mean(t)).collect();
            monotone_seen += usize::from(means.windows(2).all(|w| w[0] <= w[1]));
            let base = r.test_mean(first).unwrap_or(f64::INFINITY);
            let any_unseen_above = r
                .rows
                .iter()
                .filter(|row| row.train_mean.is_none() && row.tag > *seen.last().unwrap())
                .any(|row| row.test_mean > base);
            unseen_above_first += usize::from(any_unseen_above);
        }
        let mean_by_tag = TAG_SWEEP
            .map(|t| {
                let vals: Vec<f64> = reports.iter().filter_map(|r| r.test_mean(t)).collect();
                (t, vals.iter().sum::<f64>() / vals.len().max(1) as f64)
            })
            .collect();
        TagSummary {
            seeds: reports.len(),
            monotone_seen,
            unseen_above_first,
            mean_by_tag,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "seen tags non-decreasing: {}/{} seeds\nan unseen later tag above the first seen tag: {}/{} seeds\n",
            self.monotone_seen, self.seeds, self.unseen_above_first, self.seeds
        );
        for (t, m) in &self.mean_by_tag {
            writeln!(out, "  {t}: {m:.6}").unwrap();
        }
        out
    }
}
