//! Run configuration: a TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetConfig, ExportFormat, MaskingConfig};
use crate::error::{Error, Result};
use crate::eval::ColumnMapping;
use crate::lexicon::{LexiconPaths, Lexicons};
use crate::pipeline::Pipeline;
use crate::quotes::QuoteStyle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// A directory of `.txt` files or a single file.
    pub corpus: Option<PathBuf>,
    /// Explicit file list, used instead of `corpus` when non-empty.
    pub files: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: ExportFormat,
    pub jobs: usize,
    pub log_level: String,
    /// Treat `'...'` as dialogue instead of `"..."`.
    pub single_quotes: bool,
    pub budget: usize,
    /// Instance ids listed by `stats` for manual audit.
    pub sample_size: usize,
    pub masking: MaskingConfig,
    pub lexicons: LexiconPaths,
    /// Column layout for delimited benchmark files.
    pub benchmark_columns: Option<ColumnMapping>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            files: Vec::new(),
            out: None,
            format: ExportFormat::InstanceLines,
            jobs: 1,
            log_level: "warn".into(),
            single_quotes: false,
            budget: 400,
            sample_size: 100,
            masking: MaskingConfig::default(),
            lexicons: LexiconPaths::default(),
            benchmark_columns: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        self.masking.validate()
    }

    pub fn dataset(&self) -> DatasetConfig {
        DatasetConfig {
            masking: self.masking.clone(),
            budget: self.budget,
        }
    }

    pub fn pipeline(&self) -> Result<Pipeline> {
        Ok(Pipeline::new(
            Lexicons::load(&self.lexicons)?,
            QuoteStyle::from_flag(self.single_quotes),
        ))
    }

    /// Corpus files in sorted order. A missing corpus is an error; an empty directory is not.
    pub fn corpus_files(&self) -> Result<Vec<PathBuf>> {
        if !self.files.is_empty() {
            return Ok(self.files.clone());
        }
        let corpus = self
            .corpus
            .as_ref()
            .ok_or_else(|| Error::Config("no corpus given (--corpus, QA_CORPUS_DIR or config)".into()))?;
        let meta = std::fs::metadata(corpus).map_err(|e| Error::io(corpus, e))?;
        if meta.is_file() {
            return Ok(vec![corpus.clone()]);
        }
        let mut files = Vec::new();
        for entry in std::fs::read_dir(corpus).map_err(|e| Error::io(corpus, e))? {
            let path = entry.map_err(|e| Error::io(corpus, e))?.path();
            if path.is_file() && path.extension().is_some_and(|x| x == "txt") {
                files.push(path);
            }
        }
        files.sort();
        Ok(files)
    }
}
