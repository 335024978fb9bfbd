//! Seeded synthetic message stream for demos and end-to-end tests.
//!
//! Every (city, syndrome, hour) draws a Poisson number of symptom reports;
//! outbreaks multiply that rate for a window. Each city also emits noise that
//! the pipeline should discard: chatter without keywords, keyword mentions in
//! non-medical contexts, block-listed phrases, re-tweets, linked messages and
//! unlocated posts. Each hour is generated from its own seed, so any window
//! can be regenerated independently.

use chrono::{DateTime, Duration, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use syndromic_core::eval::LabeledText;
use syndromic_core::geo::{City, CityRegistry, LatLon};
use syndromic_core::pipeline::{BlockList, Message, Phrase, SyndromeLexicon};
use syndromic_core::store::truncate_to_hour;
use syndromic_core::text::{tokenize, Token};
use syndromic_core::{Error, Label, Result, Syndrome};

use crate::source::SourceAdapter;

/// Symptom phrases per syndrome, in `Syndrome::ALL` order.
pub const SYMPTOMS: [&[&str]; 6] = [
    &[
        "cough",
        "sore throat",
        "runny nose",
        "sneezing",
        "chest congestion",
        "flu",
    ],
    &["diarrhea", "vomiting", "stomach ache", "nausea", "food poisoning"],
    &["headache", "dizzy", "migraine", "seizure", "numbness"],
    &["rash", "itchy skin", "hives", "blisters", "spots"],
    &[
        "nosebleed",
        "bleeding gums",
        "bruising",
        "blood in stool",
        "coughing blood",
    ],
    &["fever", "chills", "fatigue", "exhausted", "night sweats"],
];

const OPENERS: &[&str] = &[
    "woke up with",
    "ugh this",
    "still fighting the",
    "day three of",
    "home sick with",
    "cannot shake this",
];
const CLOSERS: &[&str] = &[
    "today",
    "all night long",
    "need to rest",
    "feeling awful",
    "staying in bed",
    "off work again",
];
const OFF_TOPIC: &[&str] = &[
    "{} remix drops tonight",
    "new {} merch in the shop",
    "that {} movie trailer looks hilarious",
    "our band name idea is {}",
    "trivia answer was {} lol",
    "painting called {} at the gallery",
];
const CHATTER: &[&str] = &[
    "great coffee this morning",
    "traffic is terrible downtown",
    "watching the game tonight",
    "who wants pizza",
    "lovely sunset over the river",
    "finally finished my thesis",
];
pub const BLOCKED_PHRASES: &[&str] = &[
    "spring fever",
    "cabin fever",
    "bieber fever",
    "saturday night fever",
    "rash decision",
];
const BLOCKED_TEXTS: &[&str] = &[
    "spring fever is here",
    "cabin fever after the snowstorm",
    "bieber fever never ends",
    "saturday night fever on repeat",
    "made a rash decision at the mall",
];

pub fn symptoms(syndrome: Syndrome) -> &'static [&'static str] {
    SYMPTOMS[syndrome.index()]
}

/// Keyword lexicon matching the generated symptom phrases.
pub fn demo_lexicon() -> SyndromeLexicon {
    let entries = Syndrome::ALL
        .iter()
        .flat_map(|&s| symptoms(s).iter().filter_map(move |p| Phrase::parse(p).map(|p| (s, p))));
    SyndromeLexicon::new(entries).expect("every syndrome has symptoms")
}

pub fn demo_blocklist() -> BlockList {
    BlockList::new(BLOCKED_PHRASES.iter().filter_map(|p| Phrase::parse(p)).collect())
}

fn symptom_report<R: Rng>(rng: &mut R, syndrome: Syndrome) -> String {
    format!(
        "{} {} {}",
        OPENERS.choose(rng).unwrap(),
        symptoms(syndrome).choose(rng).unwrap(),
        CLOSERS.choose(rng).unwrap()
    )
}

fn off_topic<R: Rng>(rng: &mut R, syndrome: Syndrome) -> String {
    OFF_TOPIC
        .choose(rng)
        .unwrap()
        .replace("{}", symptoms(syndrome).choose(rng).unwrap())
}

/// Labelled training texts for one syndrome: symptom reports are positive,
/// the same keywords in off-topic contexts are negative.
pub fn training_texts(syndrome: Syndrome, per_class: usize, seed: u64) -> Vec<LabeledText> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((syndrome.index() as u64) << 32));
    let mut docs = Vec::with_capacity(2 * per_class);
    for _ in 0..per_class {
        for (text, label) in [
            (symptom_report(&mut rng, syndrome), Label::Positive),
            (off_topic(&mut rng, syndrome), Label::Negative),
        ] {
            docs.push(LabeledText { text, syndrome, label });
        }
    }
    docs
}

/// [`training_texts`], tokenised.
pub fn training_corpus(syndrome: Syndrome, per_class: usize, seed: u64) -> Vec<(Vec<Token>, Label)> {
    training_texts(syndrome, per_class, seed)
        .into_iter()
        .map(|t| (tokenize(&t.text), t.label))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outbreak {
    pub city: String,
    pub syndrome: Syndrome,
    pub start: DateTime<Utc>,
    pub duration_hours: u32,
    pub multiplier: f64,
}

impl Outbreak {
    pub fn active(&self, city: &str, syndrome: Syndrome, hour: DateTime<Utc>) -> bool {
        self.city == city
            && self.syndrome == syndrome
            && hour >= self.start
            && hour < self.start + Duration::hours(i64::from(self.duration_hours))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub seed: u64,
    /// Mean symptom reports per city, syndrome and hour.
    pub background_rate: f64,
    /// Mean discardable messages per city and hour.
    pub noise_rate: f64,
    /// Cities to generate for; empty means every registered city.
    pub cities: Vec<String>,
    pub outbreaks: Vec<Outbreak>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 1,
            background_rate: 20.0,
            noise_rate: 30.0,
            cities: Vec::new(),
            outbreaks: Vec::new(),
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x >= 0.0 && x.is_finite();
        if !ok(self.background_rate) || !ok(self.noise_rate) {
            return Err(Error::InvalidArgument("synthetic rates must be finite and >= 0".into()));
        }
        if self.outbreaks.iter().any(|o| !ok(o.multiplier)) {
            return Err(Error::InvalidArgument(
                "outbreak multipliers must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Rate multiplier in effect for a (city, syndrome, hour).
    pub fn multiplier(&self, city: &str, syndrome: Syndrome, hour: DateTime<Utc>) -> f64 {
        self.outbreaks
            .iter()
            .filter(|o| o.active(city, syndrome, hour))
            .map(|o| o.multiplier)
            .product()
    }
}

pub struct SyntheticSource {
    config: SyntheticConfig,
    cities: Vec<City>,
}

impl SyntheticSource {
    pub fn new(config: SyntheticConfig, registry: &CityRegistry) -> Result<Self> {
        config.validate()?;
        let cities = if config.cities.is_empty() {
            registry.cities().to_vec()
        } else {
            config
                .cities
                .iter()
                .map(|name| {
                    registry
                        .get(name)
                        .cloned()
                        .ok_or_else(|| Error::InvalidArgument(format!("unknown city `{name}`")))
                })
                .collect::<Result<_>>()?
        };
        for o in &config.outbreaks {
            if !cities.iter().any(|c| c.name == o.city) {
                return Err(Error::InvalidArgument(format!(
                    "outbreak city `{}` is not generated",
                    o.city
                )));
            }
        }
        Ok(SyntheticSource { config, cities })
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    pub fn cities(&self) -> &[City] {
        &self.cities
    }

    fn hour_messages(&self, hour: DateTime<Utc>) -> Vec<Message> {
        let stamp = hour.timestamp();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ (stamp as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut out = Vec::new();
        for (ci, city) in self.cities.iter().enumerate() {
            let mut emit = |rng: &mut ChaCha8Rng, kind: &str, text: String, located: bool| {
                let k = out.len();
                let offset = Duration::seconds(rng.random_range(0..3600));
                // Within ~16 km of the centre: well inside a 30 km radius.
                let location = located.then(|| LatLon {
                    lat: city.lat + rng.random_range(-0.1..0.1),
                    lon: city.lon + rng.random_range(-0.1..0.1),
                });
                out.push(Message {
                    id: format!("syn-{stamp}-{ci}-{kind}-{k}"),
                    user_id: format!("u{}", rng.random_range(0..5_000_000u32)),
                    timestamp: hour + offset,
                    location,
                    text,
                    is_retweet: kind == "rt",
                    has_external_link: kind == "link",
                });
            };

            for syndrome in Syndrome::ALL {
                let rate = self.config.background_rate * self.config.multiplier(&city.name, syndrome, hour);
                for _ in 0..poisson(&mut rng, rate) {
                    let text = symptom_report(&mut rng, syndrome);
                    emit(&mut rng, syndrome.as_str(), text, true);
                }
            }
            for _ in 0..poisson(&mut rng, self.config.noise_rate) {
                let syndrome = *Syndrome::ALL.choose(&mut rng).unwrap();
                match rng.random_range(0..20) {
                    0..8 => {
                        let text = CHATTER.choose(&mut rng).unwrap().to_string();
                        emit(&mut rng, "chatter", text, true)
                    }
                    8..13 => {
                        let text = off_topic(&mut rng, syndrome);
                        emit(&mut rng, "offtopic", text, true)
                    }
                    13..15 => {
                        let text = BLOCKED_TEXTS.choose(&mut rng).unwrap().to_string();
                        emit(&mut rng, "blocked", text, true)
                    }
                    15..17 => {
                        let text = symptom_report(&mut rng, syndrome);
                        emit(&mut rng, "rt", text, true)
                    }
                    17..19 => {
                        let text = symptom_report(&mut rng, syndrome);
                        emit(&mut rng, "link", text, true)
                    }
                    _ => {
                        let text = symptom_report(&mut rng, syndrome);
                        emit(&mut rng, "unlocated", text, false)
                    }
                }
            }
        }
        out.sort_by_key(|m| m.timestamp);
        out
    }
}

fn poisson<R: Rng>(rng: &mut R, rate: f64) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).map_or(0, |d| d.sample(rng) as u64)
}

impl SourceAdapter for SyntheticSource {
    fn drain(&self, from: DateTime<Utc>, to: DateTime<Utc>) -> Result<Vec<Message>> {
        let mut out = Vec::new();
        let mut hour = truncate_to_hour(from);
        while hour < to {
            out.extend(
                self.hour_messages(hour)
                    .into_iter()
                    .filter(|m| m.timestamp >= from && m.timestamp < to),
            );
            hour += Duration::hours(1);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use syndromic_core::geo::City;

    fn registry() -> CityRegistry {
        CityRegistry::new(vec![
            City::new("Tokyo", 35.68, 139.69, 30.0).unwrap(),
            City::new("London", 51.51, -0.13, 30.0).unwrap(),
        ])
        .unwrap()
    }

    fn hour(d: u32, h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2011, 3, d, h, 0, 0).unwrap()
    }

    #[test]
    fn deterministic_and_ordered() {
        let src = SyntheticSource::new(SyntheticConfig::default(), &registry()).unwrap();
        let a = src.drain(hour(2, 0), hour(2, 3)).unwrap();
        let b = src.drain(hour(2, 0), hour(2, 3)).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        // Windows compose.
        let mut parts = src.drain(hour(2, 0), hour(2, 1)).unwrap();
        parts.extend(src.drain(hour(2, 1), hour(2, 3)).unwrap());
        assert_eq!(parts, a);
    }

    #[test]
    fn located_messages_fall_inside_their_city() {
        let reg = registry();
        let src = SyntheticSource::new(SyntheticConfig::default(), &reg).unwrap();
        for m in src.drain(hour(2, 0), hour(2, 2)).unwrap() {
            if m.location.is_some() {
                assert!(reg.assign(m.location).is_some(), "{m:?}");
            }
        }
    }

    #[test]
    fn outbreak_multiplies_reports() {
        let cfg = SyntheticConfig {
            outbreaks: vec![Outbreak {
                city: "Tokyo".into(),
                syndrome: Syndrome::Rash,
                start: hour(2, 5),
                duration_hours: 2,
                multiplier: 10.0,
            }],
            ..SyntheticConfig::default()
        };
        let src = SyntheticSource::new(cfg, &registry()).unwrap();
        let rash = |h| {
            src.drain(hour(2, h), hour(2, h + 1))
                .unwrap()
                .iter()
                .filter(|m| m.id.contains("-0-rash-"))
                .count()
        };
        assert!(rash(5) > 100, "{}", rash(5));
        assert!(rash(4) < 50);
        assert!(rash(7) < 50);
    }

    #[test]
    fn lexicon_covers_reports_but_not_chatter() {
        let lex = demo_lexicon();
        for s in Syndrome::ALL {
            for (tokens, label) in training_corpus(s, 20, 3) {
                assert!(lex.candidates(&tokens).contains(&s));
                let _ = label;
            }
        }
        for c in CHATTER {
            assert!(lex.candidates(&tokenize(c)).is_empty(), "{c}");
        }
        let block = demo_blocklist();
        for t in BLOCKED_TEXTS {
            assert!(block.blocks(&tokenize(t)));
            assert!(!lex.candidates(&tokenize(t)).is_empty());
        }
    }

    #[test]
    fn symptom_lists_do_not_overlap() {
        let lex = demo_lexicon();
        for s in Syndrome::ALL {
            for p in symptoms(s) {
                let hits = lex.candidates(&tokenize(p));
                assert_eq!(hits.len(), 1, "{p} matches {hits:?}");
            }
        }
    }
}
