//! Averaged word-vector embeddings of preprompts, 2D projection and colors.

mod pca;
mod umap;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::LatLon;

pub use pca::pca_2d;
pub use umap::{fit_ab, umap_2d};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("line {line}: expected {expected} components, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("projection needs at least 3 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("vector {index} has length {found}, expected {expected}")]
    RaggedInput {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("vector {0} contains a non-finite component")]
    NonFinite(usize),
    #[error("invalid projection config: {0}")]
    Config(String),
}

/// Token → vector table with a fixed dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    dimension: usize,
    vectors: BTreeMap<String, Vec<f32>>,
}

impl Lexicon {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Adds a vector; tokens are lowercased and the first occurrence wins.
    pub fn insert(&mut self, token: &str, vector: Vec<f32>, line: usize) -> Result<(), EmbedError> {
        if vector.len() != self.dimension {
            return Err(EmbedError::Dimension {
                line,
                expected: self.dimension,
                found: vector.len(),
            });
        }
        self.vectors.entry(token.to_lowercase()).or_insert(vector);
        Ok(())
    }

    /// Parses the whitespace-separated text format, one `token v1 … vd` per
    /// line. The dimension is fixed by the first entry; a leading
    /// `count dimension` header line (word2vec style) is accepted.
    pub fn from_lines<'a, I>(lines: I) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut lex: Option<Lexicon> = None;
        for (idx, raw) in lines.into_iter().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let token = fields.next().unwrap_or_default();
            let rest: Vec<&str> = fields.collect();
            if lex.is_none() && idx == 0 && rest.len() == 1 {
                if let (Ok(_), Ok(d)) = (token.parse::<usize>(), rest[0].parse::<usize>()) {
                    lex = Some(Lexicon::new(d));
                    continue;
                }
            }
            let mut vector = Vec::with_capacity(rest.len());
            for f in &rest {
                let v: f32 = f.parse().map_err(|_| EmbedError::Format {
                    line: line_no,
                    message: format!("`{f}` is not a number"),
                })?;
                vector.push(v);
            }
            if vector.is_empty() {
                return Err(EmbedError::Format {
                    line: line_no,
                    message: "token without vector".to_string(),
                });
            }
            let lex = lex.get_or_insert_with(|| Lexicon::new(vector.len()));
            lex.insert(token, vector, line_no)?;
        }
        Ok(lex.unwrap_or_default())
    }
}

fn is_combining_mark(c: char) -> bool {
    matches!(c as u32, 0x0300..=0x036F)
}

/// Lowercase alphanumeric runs. Any other character, including `_`,
/// separates tokens; combining marks left by lowercasing (`İ` → `i̇`) are
/// dropped so Turkish capitals fold to plain ASCII letters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase().chars().filter(|c| !is_combining_mark(*c)).collect())
        .collect()
}

/// Mean of the in-vocabulary token vectors of a text.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding {
    pub vector: Vec<f64>,
    pub in_vocabulary: usize,
    pub out_of_vocabulary: usize,
}

impl TextEmbedding {
    /// True when no token was found and the vector is all zeros.
    pub fn all_oov(&self) -> bool {
        self.in_vocabulary == 0
    }
}

/// Averages the vectors of known tokens; unknown tokens are skipped, not
/// counted in the denominator. Summation runs over the sorted token
/// multiset, so any reordering of the text's tokens gives the same bits.
pub fn embed_text(lexicon: &Lexicon, text: &str) -> TextEmbedding {
    let mut tokens = tokenize(text);
    tokens.sort_unstable();
    let mut sum = vec![0.0f64; lexicon.dimension()];
    let mut hits = 0usize;
    let mut misses = 0usize;
    for t in &tokens {
        match lexicon.get(t) {
            Some(v) => {
                hits += 1;
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += f64::from(*x);
                }
            }
            None => misses += 1,
        }
    }
    if hits > 0 {
        let n = hits as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    TextEmbedding {
        vector: sum,
        in_vocabulary: hits,
        out_of_vocabulary: misses,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMethod {
    Pca,
    Umap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    pub method: ProjectionMethod,
    pub n_neighbors: usize,
    pub min_dist: f64,
    /// Optimisation epochs; `None` picks 500 for small inputs, 200 otherwise.
    pub epochs: Option<usize>,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            method: ProjectionMethod::Pca,
            n_neighbors: 15,
            min_dist: 0.1,
            epochs: None,
            seed: 42,
        }
    }
}

impl ProjectionConfig {
    pub fn umap() -> Self {
        Self {
            method: ProjectionMethod::Umap,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.n_neighbors < 2 {
            return Err(EmbedError::Config("n_neighbors must be ≥ 2".into()));
        }
        if !(self.min_dist >= 0.0 && self.min_dist.is_finite()) {
            return Err(EmbedError::Config("min_dist must be finite and ≥ 0".into()));
        }
        Ok(())
    }
}

/// 2D coordinates plus any warnings raised along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub points: Vec<[f64; 2]>,
    pub warnings: Vec<String>,
}

fn check_input(vectors: &[Vec<f64>]) -> Result<usize, EmbedError> {
    if vectors.len() < 3 {
        return Err(EmbedError::TooFewVectors(vectors.len()));
    }
    let d = vectors[0].len();
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != d {
            return Err(EmbedError::RaggedInput {
                index: i,
                expected: d,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite(i));
        }
    }
    Ok(d)
}

/// Projects vectors to 2D with the configured method, preserving order.
pub fn project_2d(vectors: &[Vec<f64>], cfg: &ProjectionConfig) -> Result<Projection, EmbedError> {
    check_input(vectors)?;
    match cfg.method {
        ProjectionMethod::Pca => Ok(Projection {
            points: pca_2d(vectors),
            warnings: Vec::new(),
        }),
        ProjectionMethod::Umap => {
            cfg.validate()?;
            umap_2d(vectors, cfg)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub fn hex(self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.r, self.g, self.b)
    }
}

/// Fixed third channel.
pub const BLUE_CHANNEL: u8 = 128;

/// Linear color map: red follows the first coordinate, green the second,
/// both rescaled to `[0, 255]`; a flat axis maps to 128.
pub fn colorize(xy: &[[f64; 2]]) -> Vec<Rgb> {
    let range = |axis: usize| {
        xy.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[axis]), hi.max(p[axis]))
        })
    };
    let (x0, x1) = range(0);
    let (y0, y1) = range(1);
    let channel = |v: f64, lo: f64, hi: f64| -> u8 {
        if !(hi > lo) {
            return 128;
        }
        libm::round(255.0 * (v - lo) / (hi - lo)).clamp(0.0, 255.0) as u8
    };
    xy.iter()
        .map(|p| Rgb {
            r: channel(p[0], x0, x1),
            g: channel(p[1], y0, y1),
            b: BLUE_CHANNEL,
        })
        .collect()
}

/// A preprompt placed both on the map and in the projected space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPoint {
    pub preprompt_id: String,
    pub location: LatLon,
    pub vector: Vec<f64>,
    pub xy2d: [f64; 2],
    pub color: Rgb,
}
