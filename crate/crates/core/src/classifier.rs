//! Common interface over the per-syndrome binary classifiers.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nb::{NbModel, NbParams};
use crate::svm::{KernelChoice, SolverSettings, SvmModel};
use crate::syndrome::{Label, Syndrome};
use crate::text::{tokenize, BinaryVector, Token, Vocabulary};

pub trait BinaryClassifier: Send + Sync {
    fn predict(&self, x: &BinaryVector) -> Result<Label>;
}

/// Something that fits a [`BinaryClassifier`] from labelled vectors.
pub trait Trainer: Sync {
    type Model: BinaryClassifier;

    fn train(&self, examples: &[(BinaryVector, Label)]) -> Result<Self::Model>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NbTrainer {
    pub params: NbParams,
}

impl Trainer for NbTrainer {
    type Model = NbModel;

    fn train(&self, examples: &[(BinaryVector, Label)]) -> Result<NbModel> {
        NbModel::train(examples, self.params)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SvmTrainer {
    pub kernel: KernelChoice,
    pub settings: SolverSettings,
}

impl Trainer for SvmTrainer {
    type Model = SvmModel;

    fn train(&self, examples: &[(BinaryVector, Label)]) -> Result<SvmModel> {
        let dimension = examples.first().map_or(0, |(x, _)| x.dimension());
        SvmModel::train(examples, self.kernel.resolve(dimension), self.settings)
    }
}

/// Named model configuration: `nb`, `svm-poly1`, `svm-poly2`, `svm-poly3`
/// or `svm-rbf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelSpec {
    NaiveBayes,
    SvmPolynomial(u32),
    SvmRbf,
}

impl ModelSpec {
    /// Best-performing configuration per syndrome from the published
    /// cross-validation results, used as the deployed default.
    pub fn deployed_default(syndrome: Syndrome) -> Self {
        match syndrome {
            Syndrome::Respiratory | Syndrome::Hemorrhagic => ModelSpec::NaiveBayes,
            Syndrome::Gastrointestinal => ModelSpec::SvmPolynomial(2),
            Syndrome::Neurological | Syndrome::Rash | Syndrome::Constitutional => ModelSpec::SvmPolynomial(1),
        }
    }

    /// Trains this configuration on tokenised documents.
    pub fn fit(&self, docs: &[(Vec<Token>, Label)], nb: NbParams, svm: SolverSettings) -> Result<TextClassifier> {
        match *self {
            ModelSpec::NaiveBayes => TextClassifier::fit(&NbTrainer { params: nb }, docs),
            ModelSpec::SvmPolynomial(degree) => TextClassifier::fit(
                &SvmTrainer {
                    kernel: KernelChoice::polynomial(degree),
                    settings: svm,
                },
                docs,
            ),
            ModelSpec::SvmRbf => TextClassifier::fit(
                &SvmTrainer {
                    kernel: KernelChoice::rbf(),
                    settings: svm,
                },
                docs,
            ),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::NaiveBayes => f.write_str("nb"),
            ModelSpec::SvmPolynomial(d) => write!(f, "svm-poly{d}"),
            ModelSpec::SvmRbf => f.write_str("svm-rbf"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nb" => Ok(ModelSpec::NaiveBayes),
            "svm-rbf" => Ok(ModelSpec::SvmRbf),
            other => other
                .strip_prefix("svm-poly")
                .and_then(|d| d.parse::<u32>().ok())
                .filter(|d| *d >= 1)
                .map(ModelSpec::SvmPolynomial)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown model spec `{other}`"))),
        }
    }
}

/// Either kind of trained model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    NaiveBayes(NbModel),
    Svm(SvmModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::NaiveBayes(_) => "nb",
            Model::Svm(_) => "svm",
        }
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        match self {
            Model::NaiveBayes(m) => m.write_to(out),
            Model::Svm(m) => m.write_to(out),
        }
    }

    /// Reads either model file format, dispatching on the header line.
    pub fn read_from<R: BufRead>(mut input: R) -> Result<Self> {
        let buf = input.fill_buf()?;
        if buf.starts_with(b"nb-model") {
            Ok(Model::NaiveBayes(NbModel::read_from(input)?))
        } else if buf.starts_with(b"svm-model") {
            Ok(Model::Svm(SvmModel::read_from(input)?))
        } else {
            Err(Error::parse(1, "unrecognised model file header"))
        }
    }
}

impl BinaryClassifier for Model {
    fn predict(&self, x: &BinaryVector) -> Result<Label> {
        match self {
            Model::NaiveBayes(m) => m.predict(x),
            Model::Svm(m) => m.predict(x),
        }
    }
}

/// A model together with the vocabulary it was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct TextClassifier {
    pub vocabulary: Vocabulary,
    pub model: Model,
}

impl TextClassifier {
    /// Builds the vocabulary from `docs` and trains `trainer` on it.
    pub fn fit<T>(trainer: &T, docs: &[(Vec<Token>, Label)]) -> Result<Self>
    where
        T: Trainer,
        T::Model: Into<Model>,
    {
        let vocabulary = Vocabulary::build(docs.iter().map(|(tokens, _)| tokens))?;
        let examples: Vec<_> = docs
            .iter()
            .map(|(tokens, label)| (vocabulary.vectorize(tokens), *label))
            .collect();
        let model = trainer.train(&examples)?.into();
        Ok(TextClassifier { vocabulary, model })
    }

    pub fn predict_tokens(&self, tokens: &[Token]) -> Result<Label> {
        self.model.predict(&self.vocabulary.vectorize(tokens))
    }

    pub fn predict_text(&self, text: &str) -> Result<Label> {
        self.predict_tokens(&tokenize(text))
    }

    /// Writes `<stem>.vocab` and `<stem>.model`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut vocab = std::io::BufWriter::new(File::create(dir.join(format!("{stem}.vocab")))?);
        self.vocabulary.write_to(&mut vocab)?;
        vocab.flush()?;
        let mut model = std::io::BufWriter::new(File::create(dir.join(format!("{stem}.model")))?);
        self.model.write_to(&mut model)?;
        model.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let vocabulary = Vocabulary::read_from(BufReader::new(File::open(dir.join(format!("{stem}.vocab")))?))?;
        let model = Model::read_from(BufReader::new(File::open(dir.join(format!("{stem}.model")))?))?;
        let expected = match &model {
            Model::NaiveBayes(m) => m.vocab_size(),
            Model::Svm(m) => m.dimension(),
        };
        if expected != vocabulary.len() {
            return Err(Error::DimensionMismatch {
                expected,
                actual: vocabulary.len(),
            });
        }
        Ok(TextClassifier { vocabulary, model })
    }
}

impl From<NbModel> for Model {
    fn from(m: NbModel) -> Self {
        Model::NaiveBayes(m)
    }
}

impl From<SvmModel> for Model {
    fn from(m: SvmModel) -> Self {
        Model::Svm(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_spec_strings() {
        for spec in [
            ModelSpec::NaiveBayes,
            ModelSpec::SvmPolynomial(1),
            ModelSpec::SvmPolynomial(3),
            ModelSpec::SvmRbf,
        ] {
            assert_eq!(spec.to_string().parse::<ModelSpec>().unwrap(), spec);
        }
        assert!("svm-poly0".parse::<ModelSpec>().is_err());
        assert!("tree".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn deployed_table() {
        use Syndrome::*;
        assert_eq!(ModelSpec::deployed_default(Respiratory), ModelSpec::NaiveBayes);
        assert_eq!(
            ModelSpec::deployed_default(Gastrointestinal),
            ModelSpec::SvmPolynomial(2)
        );
        assert_eq!(ModelSpec::deployed_default(Neurological), ModelSpec::SvmPolynomial(1));
        assert_eq!(ModelSpec::deployed_default(Rash), ModelSpec::SvmPolynomial(1));
        assert_eq!(ModelSpec::deployed_default(Hemorrhagic), ModelSpec::NaiveBayes);
        assert_eq!(ModelSpec::deployed_default(Constitutional), ModelSpec::SvmPolynomial(1));
    }

    #[test]
    fn text_classifier_save_load() {
        let docs: Vec<(Vec<Token>, Label)> = [
            ("sore throat and cough", true),
            ("bad cough all night", true),
            ("throat hurts so much", true),
            ("great day at the beach", false),
            ("cough syrup ad on tv", false),
            ("lovely sunny weather", false),
        ]
        .iter()
        .map(|(t, l)| (tokenize(t), Label::from_bool(*l)))
        .collect();
        let dir = tempfile::tempdir().unwrap();
        for spec in [ModelSpec::NaiveBayes, ModelSpec::SvmPolynomial(2), ModelSpec::SvmRbf] {
            let clf = spec.fit(&docs, NbParams::default(), SolverSettings::default()).unwrap();
            clf.save(dir.path(), "respiratory").unwrap();
            let back = TextClassifier::load(dir.path(), "respiratory").unwrap();
            assert_eq!(back, clf);
            assert_eq!(
                back.predict_text("my throat is sore").unwrap(),
                clf.predict_text("my throat is sore").unwrap()
            );
        }
    }
}
