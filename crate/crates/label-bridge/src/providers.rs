//! Language-ID and embedding providers: precomputed TSV and the sidecar
//! HTTP protocol.
//!
//! `POST {base}/langid` with `{"texts": [..]}` answers
//! `{"results": [[{"language": "ru", "probability": 0.93}, ..], ..]}`, one
//! list per text in request order.
//!
//! `POST {base}/embed` with `{"texts": [..], "granularity": "sentence" |
//! "subwords", "model": tag}` answers `{"results": [..]}` with one object
//! per text: `{"model", "dimension", "vector"}` for sentences or
//! `{"model", "dimension", "subwords": [{"token", "vector"}, ..]}`.
//!
//! HTTP 503 and connection failures are reported as unavailable; other
//! error statuses as invalid requests.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use label_bridge_core::dataset::{LanguageIdProvider, ProviderError};
use label_bridge_core::scoring::{Embedding, SentenceEmbedder, SubwordEmbedder, SubwordVector};
use label_bridge_core::text::label_key;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectors::Granularity;

pub const LANGID_TSV_HEADER: &str = "label\tlang\tprob";

/// Precomputed language-ID distributions, `label lang prob` per row.
#[derive(Debug, Clone, Default)]
pub struct TsvLanguageId {
    table: HashMap<String, Vec<(String, f64)>>,
}

impl TsvLanguageId {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|(line, message)| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })
    }

    pub fn parse(text: &str) -> Result<Self, (usize, String)> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
        match lines.next() {
            Some((_, h)) if h == LANGID_TSV_HEADER => {}
            Some((i, h)) => return Err((i + 1, format!("expected header {LANGID_TSV_HEADER:?}, found {h:?}"))),
            None => return Err((0, "empty language-ID table".into())),
        }
        let mut table: HashMap<String, Vec<(String, f64)>> = HashMap::new();
        for (i, line) in lines.filter(|(_, l)| !l.is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err((i + 1, format!("expected 3 fields, found {}", f.len())));
            }
            let p: f64 = f[2]
                .parse()
                .ok()
                .filter(|p| (0.0..=1.0).contains(p))
                .ok_or_else(|| (i + 1, format!("probability {:?} not in [0, 1]", f[2])))?;
            table.entry(label_key(f[0])).or_default().push((f[1].to_string(), p));
        }
        for dist in table.values_mut() {
            dist.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        }
        Ok(TsvLanguageId { table })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl LanguageIdProvider for TsvLanguageId {
    fn probabilities(&self, text: &str) -> Result<Vec<(String, f64)>, ProviderError> {
        self.table
            .get(&label_key(text))
            .cloned()
            .ok_or_else(|| ProviderError::Missing(text.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct HttpOptions {
    pub batch_size: usize,
    pub timeout: Duration,
    /// Extra attempts after a retryable failure.
    pub retries: u32,
    pub backoff: Duration,
}

impl Default for HttpOptions {
    fn default() -> Self {
        HttpOptions {
            batch_size: 64,
            timeout: Duration::from_secs(30),
            retries: 2,
            backoff: Duration::from_millis(200),
        }
    }
}

struct Transport {
    base: String,
    agent: ureq::Agent,
    options: HttpOptions,
}

impl Transport {
    fn new(base_url: &str, options: HttpOptions) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(options.timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Transport {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
            options,
        }
    }

    fn post<Q: Serialize, A: for<'de> Deserialize<'de>>(&self, route: &str, body: &Q) -> Result<A, ProviderError> {
        let url = format!("{}{route}", self.base);
        let mut attempt = 0;
        loop {
            match self.post_once(&url, body) {
                Err(e) if e.is_retryable() && attempt < self.options.retries => {
                    attempt += 1;
                    log::warn!("{url}: {e}; retrying ({attempt}/{})", self.options.retries);
                    std::thread::sleep(self.options.backoff * attempt);
                }
                other => return other,
            }
        }
    }

    fn post_once<Q: Serialize, A: for<'de> Deserialize<'de>>(&self, url: &str, body: &Q) -> Result<A, ProviderError> {
        let mut resp = self
            .agent
            .post(url)
            .send_json(body)
            .map_err(|e| ProviderError::Unavailable(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        if status == 503 {
            return Err(ProviderError::Unavailable(format!("{url}: HTTP 503")));
        }
        if status != 200 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ProviderError::Invalid(format!("{url}: HTTP {status}: {}", text.trim())));
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| ProviderError::Invalid(format!("{url}: {e}")))
    }
}

#[derive(Serialize)]
struct TextsRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct LangIdResponse {
    results: Vec<Vec<LangProb>>,
}

#[derive(Deserialize)]
struct LangProb {
    language: String,
    probability: f64,
}

/// `/langid` client with a per-text cache.
pub struct HttpLanguageId {
    transport: Transport,
    cache: Mutex<HashMap<String, Vec<(String, f64)>>>,
}

impl HttpLanguageId {
    pub fn new(base_url: &str, options: HttpOptions) -> Self {
        HttpLanguageId {
            transport: Transport::new(base_url, options),
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Fetches every uncached text in batches.
    pub fn prefetch(&self, texts: &[&str]) -> Result<(), ProviderError> {
        let missing = uncached(&self.cache, texts);
        for batch in missing.chunks(self.transport.options.batch_size.max(1)) {
            let resp: LangIdResponse = self.transport.post("/langid", &TextsRequest { texts: batch })?;
            if resp.results.len() != batch.len() {
                return Err(ProviderError::Invalid(format!(
                    "/langid returned {} results for {} texts",
                    resp.results.len(),
                    batch.len()
                )));
            }
            let mut cache = self.cache.lock().expect("cache lock");
            for (t, dist) in batch.iter().zip(resp.results) {
                let dist = dist.into_iter().map(|p| (p.language, p.probability)).collect();
                cache.insert(label_key(t), dist);
            }
        }
        Ok(())
    }
}

fn uncached<'t, V>(cache: &Mutex<HashMap<String, V>>, texts: &[&'t str]) -> Vec<&'t str> {
    let cache = cache.lock().expect("cache lock");
    let mut seen = std::collections::HashSet::new();
    texts
        .iter()
        .copied()
        .filter(|t| {
            let k = label_key(t);
            !cache.contains_key(&k) && seen.insert(k)
        })
        .collect()
}

impl LanguageIdProvider for HttpLanguageId {
    fn probabilities(&self, text: &str) -> Result<Vec<(String, f64)>, ProviderError> {
        self.prefetch(&[text])?;
        let cache = self.cache.lock().expect("cache lock");
        cache
            .get(&label_key(text))
            .cloned()
            .ok_or_else(|| ProviderError::Missing(text.to_string()))
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
    granularity: &'static str,
    model: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    results: Vec<EmbedResult>,
}

#[derive(Deserialize)]
struct EmbedResult {
    model: String,
    dimension: usize,
    #[serde(default)]
    vector: Option<Vec<f32>>,
    #[serde(default)]
    subwords: Option<Vec<SubwordEntry>>,
}

#[derive(Deserialize)]
struct SubwordEntry {
    token: String,
    vector: Vec<f32>,
}

#[derive(Clone)]
enum Cached {
    Sentence(Embedding),
    Subwords(Vec<SubwordVector>),
}

/// `/embed` client for one model tag and granularity, with batching and a
/// per-text cache.
pub struct HttpEmbedder {
    transport: Transport,
    model: String,
    granularity: Granularity,
    cache: Mutex<HashMap<String, Cached>>,
    dimension: Mutex<Option<usize>>,
}

impl HttpEmbedder {
    pub fn new(base_url: &str, model: &str, granularity: Granularity, options: HttpOptions) -> Self {
        HttpEmbedder {
            transport: Transport::new(base_url, options),
            model: model.to_string(),
            granularity,
            cache: Mutex::new(HashMap::new()),
            dimension: Mutex::new(None),
        }
    }

    fn check_dimension(&self, r: &EmbedResult, got: usize) -> Result<(), ProviderError> {
        if r.model != self.model {
            return Err(ProviderError::Invalid(format!("asked for model {}, got {}", self.model, r.model)));
        }
        if got != r.dimension {
            return Err(ProviderError::Invalid(format!(
                "declared dimension {} but vector has {got}",
                r.dimension
            )));
        }
        let mut dim = self.dimension.lock().expect("dimension lock");
        match *dim {
            Some(d) if d != got => Err(ProviderError::Invalid(format!(
                "model {} changed dimension from {d} to {got}",
                self.model
            ))),
            _ => {
                *dim = Some(got);
                Ok(())
            }
        }
    }

    fn convert(&self, r: EmbedResult) -> Result<Cached, ProviderError> {
        let invalid = |e: label_bridge_core::scoring::EmbeddingError| ProviderError::Invalid(e.to_string());
        match self.granularity {
            Granularity::Sentence => {
                let v = r
                    .vector
                    .clone()
                    .ok_or_else(|| ProviderError::Invalid("sentence result without vector".into()))?;
                self.check_dimension(&r, v.len())?;
                Ok(Cached::Sentence(Embedding::new(v, &self.model).map_err(invalid)?))
            }
            Granularity::Subwords => {
                let units = r
                    .subwords
                    .as_ref()
                    .ok_or_else(|| ProviderError::Invalid("sub-word result without subwords".into()))?;
                let mut out = Vec::with_capacity(units.len());
                for u in units {
                    self.check_dimension(&r, u.vector.len())?;
                    out.push(SubwordVector {
                        token: u.token.clone(),
                        vector: Embedding::new(u.vector.clone(), &self.model).map_err(invalid)?,
                    });
                }
                Ok(Cached::Subwords(out))
            }
        }
    }

    /// Fetches every uncached text in batches of the configured size.
    pub fn prefetch(&self, texts: &[&str]) -> Result<(), ProviderError> {
        let missing = uncached(&self.cache, texts);
        for batch in missing.chunks(self.transport.options.batch_size.max(1)) {
            let req = EmbedRequest {
                texts: batch,
                granularity: self.granularity.as_str(),
                model: &self.model,
            };
            let resp: EmbedResponse = self.transport.post("/embed", &req)?;
            if resp.results.len() != batch.len() {
                return Err(ProviderError::Invalid(format!(
                    "/embed returned {} results for {} texts",
                    resp.results.len(),
                    batch.len()
                )));
            }
            let converted = resp
                .results
                .into_iter()
                .map(|r| self.convert(r))
                .collect::<Result<Vec<_>, _>>()?;
            let mut cache = self.cache.lock().expect("cache lock");
            for (t, c) in batch.iter().zip(converted) {
                cache.insert(label_key(t), c);
            }
        }
        Ok(())
    }

    fn get(&self, text: &str) -> Result<Cached, ProviderError> {
        self.prefetch(&[text])?;
        let cache = self.cache.lock().expect("cache lock");
        cache
            .get(&label_key(text))
            .cloned()
            .ok_or_else(|| ProviderError::Missing(text.to_string()))
    }
}

impl SentenceEmbedder for HttpEmbedder {
    fn embed_sentence(&self, text: &str) -> Result<Embedding, ProviderError> {
        match self.get(text)? {
            Cached::Sentence(e) => Ok(e),
            Cached::Subwords(_) => Err(ProviderError::Invalid("client configured for sub-words".into())),
        }
    }
}

impl SubwordEmbedder for HttpEmbedder {
    fn embed_subwords(&self, text: &str) -> Result<Vec<SubwordVector>, ProviderError> {
        match self.get(text)? {
            Cached::Subwords(v) => Ok(v),
            Cached::Sentence(_) => Err(ProviderError::Invalid("client configured for sentences".into())),
        }
    }
}
