//! Synthetic corpora for tests, benchmarks and offline demos.
//!
//! [`keyword_corpus`] produces NLI examples whose label is a deterministic
//! function of a cue word in the hypothesis, so a bag-of-words model can
//! separate the classes. The `fixture_*` builders reproduce the row counts,
//! class counts and domain supports of the shared-task files without any of
//! their text.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, NliExample, Source};
use crate::label::Label;

const FILLER: &[&str] = &[
    "company", "customer", "account", "policy", "service", "online", "store", "review", "product", "order",
    "website", "phone", "message", "employee", "manager", "payment", "refund", "data", "record", "app",
    "camera", "store", "shipping", "contract", "notice", "website", "update", "support", "delivery", "price",
    "email", "terms", "report", "system", "login", "user", "video", "subscription", "warranty", "office",
];

const ENTAILED_CUES: &[&str] = &["confirmed", "matched", "consistent"];
const NEUTRAL_CUES: &[&str] = &["weather", "vacation", "hobby"];
const CONTRADICT_CUES: &[&str] = &["denied", "refuted", "opposite"];

/// `(legal_act, domain)` tags of the shared-task test split.
pub const DOMAINS: &[(&str, &str)] = &[
    ("Privacy", "BIPA"),
    ("Privacy", "Data-Breach"),
    ("Privacy", "VPPA"),
    ("TCPA", "TCPA"),
    ("Consumer", "Consumer"),
    ("WAGE", "WAGE"),
];

pub fn cue_words(label: Label) -> &'static [&'static str] {
    match label {
        Label::Entailed => ENTAILED_CUES,
        Label::Neutral => NEUTRAL_CUES,
        Label::Contradict => CONTRADICT_CUES,
    }
}

fn filler<R: Rng>(rng: &mut R, n: usize) -> Vec<&'static str> {
    (0..n).map(|_| *FILLER.choose(rng).expect("non-empty")).collect()
}

fn sentence<R: Rng>(rng: &mut R, cue: Option<&str>) -> String {
    let len = rng.gen_range(8..14);
    let mut words = filler(rng, len);
    if let Some(cue) = cue {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, cue);
    }
    let mut s = words.join(" ");
    s.push('.');
    s
}

/// Class-balanced corpus where each hypothesis contains one cue word of its
/// label. With `with_domains`, consecutive label triples cycle through
/// [`DOMAINS`], so every domain sees every label.
pub fn keyword_corpus(name: &str, n: usize, seed: u64, source: Source, with_domains: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|i| {
            let label = Label::ALL[i % 3];
            let cue = *cue_words(label).choose(&mut rng).expect("non-empty");
            let premise = format!("{} {}", sentence(&mut rng, None), sentence(&mut rng, None));
            let hypothesis = format!("{} {}", sentence(&mut rng, Some(cue)), sentence(&mut rng, None));
            let e = NliExample::new(format!("{name}-{i:05}"), premise, hypothesis, label).with_source(source);
            if with_domains {
                let (act, domain) = DOMAINS[(i / 3) % DOMAINS.len()];
                e.with_domain(Some(act), Some(domain))
            } else {
                e
            }
        })
        .collect();
    Dataset::new(name, examples).expect("generated ids are unique")
}

/// 84 rows: 40 Entailed, 29 Neutral, 15 Contradict; domain supports
/// BIPA 22, Data-Breach 20, VPPA 6, TCPA 9, Consumer 8, WAGE 19.
pub fn fixture_test_split(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Entailed, 40)
        .chain(std::iter::repeat_n(Label::Neutral, 29))
        .chain(std::iter::repeat_n(Label::Contradict, 15))
        .collect();
    labels.shuffle(&mut rng);
    let supports = [22, 20, 6, 9, 8, 19];
    let domains = DOMAINS
        .iter()
        .zip(supports)
        .flat_map(|(&tag, n)| std::iter::repeat_n(tag, n));
    let examples = labels
        .into_iter()
        .zip(domains)
        .enumerate()
        .map(|(i, (label, (act, domain)))| {
            let cue = *cue_words(label).choose(&mut rng).expect("non-empty");
            NliExample::new(
                format!("test-{i:03}"),
                format!("{} {}", sentence(&mut rng, None), sentence(&mut rng, None)),
                sentence(&mut rng, Some(cue)),
                label,
            )
            .with_domain(Some(act), Some(domain))
            .with_source(Source::Nllp)
        })
        .collect();
    Dataset::new("test", examples).expect("unique ids")
}

/// Two 312-row training files sharing 162 examples (with whitespace and case
/// differences and different ids), so their deduplicated union has 462 rows.
pub fn fixture_training_pair(seed: u64) -> (Dataset, Dataset) {
    const SIZE: usize = 312;
    const SHARED: usize = 162;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |prefix: &str, i: usize| {
        let label = Label::ALL[i % 3];
        let cue = *cue_words(label).choose(&mut rng).expect("non-empty");
        let (act, domain) = DOMAINS[i % DOMAINS.len()];
        NliExample::new(
            format!("{prefix}-{i:03}"),
            format!("{} {} {i}", sentence(&mut rng, None), sentence(&mut rng, None)),
            sentence(&mut rng, Some(cue)),
            label,
        )
        .with_domain(Some(act), Some(domain))
        .with_source(Source::Nllp)
    };
    let a: Vec<NliExample> = (0..SIZE).map(|i| make("shared-task", i)).collect();
    let mut b: Vec<NliExample> = (SIZE..2 * SIZE - SHARED).map(|i| make("legallens", i)).collect();
    for (j, orig) in a.iter().take(SHARED).enumerate() {
        let mut copy = orig.clone();
        copy.id = format!("legallens-dup-{j:03}");
        copy.premise = format!("  {}", orig.premise.replacen(' ', "  ", 1));
        copy.hypothesis = orig.hypothesis.to_uppercase();
        b.push(copy);
    }
    (
        Dataset::new("train_shared_task", a).expect("unique ids"),
        Dataset::new("train_legallens", b).expect("unique ids"),
    )
}
