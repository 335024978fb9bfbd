#![allow(dead_code)]

use chrono::{DateTime, TimeZone, Utc};
use syndromic_core::classifier::ModelSpec;
use syndromic_core::geo::{City, CityRegistry, LatLon};
use syndromic_core::nb::NbParams;
use syndromic_core::pipeline::{ClassifierSet, Message, Pipeline};
use syndromic_core::svm::SolverSettings;
use syndromic_core::Syndrome;
use syndromic_service::synthetic::{demo_blocklist, demo_lexicon, training_corpus};

pub fn hour(day: u32, h: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 3, day, h, 0, 0).unwrap()
}

/// Two cities far enough apart that their radii never overlap.
pub fn registry() -> CityRegistry {
    CityRegistry::new(vec![
        City::new("Alpha", 10.0, 10.0, 30.0).unwrap(),
        City::new("Beta", 20.0, 20.0, 30.0).unwrap(),
    ])
    .unwrap()
}

pub fn classifiers() -> ClassifierSet {
    let mut set = ClassifierSet::default();
    for s in Syndrome::ALL {
        let docs = training_corpus(s, 150, 17);
        let clf = ModelSpec::deployed_default(s)
            .fit(&docs, NbParams::default(), SolverSettings::default())
            .unwrap();
        set.insert(s, clf);
    }
    set
}

pub fn pipeline() -> Pipeline {
    Pipeline::new(demo_lexicon(), demo_blocklist(), classifiers())
}

pub fn message(id: &str, user: &str, at: DateTime<Utc>, loc: Option<(f64, f64)>, text: &str) -> Message {
    Message {
        id: id.into(),
        user_id: user.into(),
        timestamp: at,
        location: loc.map(|(lat, lon)| LatLon::new(lat, lon).unwrap()),
        text: text.into(),
        is_retweet: false,
        has_external_link: false,
    }
}
