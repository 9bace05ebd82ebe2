//! Survey runs persisted as an append-only JSONL record log with resume.
//!
//! An artifact directory holds `manifest.json` and `records.jsonl`. Cells are
//! enumerated provider, language, mode, replication, item; within a
//! replication all 60 items come before the next replication. Workers may
//! finish out of order, but a single writer appends records in cell order, so
//! a mock run replays to identical bytes.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use crate::config::RunConfig;
use crate::config::{Backend, ConfigError, ProviderConfig};
use crate::instrument::{load_item_bank, InstrumentError, ItemBank, Language, Mode, PromptTemplates};
use crate::par::Execution;
use crate::providers::{
    administer_item, AdministrationRecord, CellKey, ChatClient, Clock, CompletionRequest, FatalProviderError,
    HttpClient, MockClient, ProviderError, ProviderParams, RateLimiter, FORMAT_VERSION,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no artifact at {0} (manifest.json not found)")]
    MissingManifest(PathBuf),
    #[error("manifest does not match config: {0}")]
    ManifestMismatch(String),
    #[error("{path} line {line}: {reason}")]
    CorruptLog { path: PathBuf, line: usize, reason: String },
    #[error("unsupported format_version {found} in {path}")]
    FormatVersion { path: PathBuf, found: u32 },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io { path: path.to_path_buf(), source }
}

/// Snapshot of the study a log belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub generator: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub item_bank_sha256: String,
    pub prompts_sha256: String,
    pub expected_cells: usize,
    pub config: RunConfig,
}

impl Manifest {
    /// First field where this manifest and `config` describe different studies.
    pub fn incompatibility(&self, config: &RunConfig, bank: &ItemBank, prompts: &PromptTemplates) -> Option<String> {
        let old = &self.config;
        if old.replications != config.replications {
            return Some(format!("replications {} vs {}", old.replications, config.replications));
        }
        if old.seed != config.seed {
            return Some(format!("seed {} vs {}", old.seed, config.seed));
        }
        if old.languages != config.languages {
            return Some(format!("languages {:?} vs {:?}", old.languages, config.languages));
        }
        if old.modes != config.modes {
            return Some(format!("modes {:?} vs {:?}", old.modes, config.modes));
        }
        if self.item_bank_sha256 != bank.fingerprint() {
            return Some("item bank differs".into());
        }
        if self.prompts_sha256 != prompts_fingerprint(prompts) {
            return Some("prompt templates differ".into());
        }
        let names = |c: &RunConfig| c.providers.iter().map(|p| p.params.name.clone()).collect::<Vec<_>>();
        if names(old) != names(config) {
            return Some(format!("providers {:?} vs {:?}", names(old), names(config)));
        }
        for (a, b) in old.providers.iter().zip(&config.providers) {
            let (pa, pb) = (&a.params, &b.params);
            if pa.model_id != pb.model_id || pa.version_tag != pb.version_tag || pa.temperature != pb.temperature {
                return Some(format!("provider {} model settings differ", pa.name));
            }
            if a.backend != b.backend {
                return Some(format!("provider {} backend differs", pa.name));
            }
        }
        None
    }
}

pub fn prompts_fingerprint(prompts: &PromptTemplates) -> String {
    let mut h = Sha256::new();
    for mode in Mode::ALL {
        for lang in Language::ALL {
            let t = prompts.template(mode, lang);
            h.update((t.len() as u64).to_le_bytes());
            h.update(t.as_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// A loaded artifact: manifest plus every record in log order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub records: Vec<AdministrationRecord>,
}

impl RunArtifact {
    /// Read `manifest.json` and replay `records.jsonl`. A truncated final
    /// line (no trailing newline, not valid JSON) is ignored.
    pub fn load(dir: &Path) -> Result<Self, RunnerError> {
        let manifest = read_manifest(dir)?;
        let (records, _) = read_records(&dir.join(RECORDS_FILE))?;
        Ok(Self { dir: dir.to_path_buf(), manifest, records })
    }

    pub fn config(&self) -> &RunConfig {
        &self.manifest.config
    }

    pub fn keys(&self) -> HashSet<CellKey> {
        self.records.iter().map(AdministrationRecord::key).collect()
    }

    /// Cells the manifest's config expects but the log lacks, in cell order.
    pub fn missing_cells(&self, bank: &ItemBank) -> Vec<CellKey> {
        let have = self.keys();
        enumerate_cells(self.config(), bank).into_iter().filter(|k| !have.contains(k)).collect()
    }

    pub fn is_complete(&self, bank: &ItemBank) -> bool {
        self.missing_cells(bank).is_empty()
    }
}

fn read_manifest(dir: &Path) -> Result<Manifest, RunnerError> {
    let path = dir.join(MANIFEST_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(RunnerError::MissingManifest(dir.to_path_buf())),
        Err(e) => return Err(io_err(&path)(e)),
    };
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| RunnerError::CorruptLog { path: path.clone(), line: e.line(), reason: e.to_string() })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(RunnerError::FormatVersion { path, found: manifest.format_version });
    }
    Ok(manifest)
}

/// Parse the log. Returns the records and the byte length of the valid prefix.
fn read_records(path: &Path) -> Result<(Vec<AdministrationRecord>, u64), RunnerError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut valid_len = 0u64;
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        let line = buf.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            valid_len += n as u64;
            continue;
        }
        match serde_json::from_str::<AdministrationRecord>(line) {
            Ok(rec) => {
                if rec.format_version != FORMAT_VERSION {
                    return Err(RunnerError::FormatVersion { path: path.to_path_buf(), found: rec.format_version });
                }
                if !seen.insert(rec.key()) {
                    return Err(RunnerError::CorruptLog {
                        path: path.to_path_buf(),
                        line: line_no,
                        reason: format!("duplicate cell {:?}", rec.key()),
                    });
                }
                // A valid final line without its newline is kept; the writer adds one.
                records.push(rec);
                valid_len += n as u64;
            }
            Err(_) if !complete => break,
            Err(e) => {
                return Err(RunnerError::CorruptLog { path: path.to_path_buf(), line: line_no, reason: e.to_string() })
            }
        }
    }
    Ok((records, valid_len))
}

/// Every cell of a study in run order.
pub fn enumerate_cells(config: &RunConfig, bank: &ItemBank) -> Vec<CellKey> {
    let mut cells = Vec::new();
    for p in &config.providers {
        for &language in &config.languages {
            for &mode in &config.modes {
                for replication in 1..=config.replications {
                    for item in bank.items() {
                        cells.push(CellKey {
                            provider: p.params.name.clone(),
                            language,
                            mode,
                            item_id: item.id,
                            replication,
                        });
                    }
                }
            }
        }
    }
    cells
}

/// Load the bank and templates a config points at.
pub fn load_instrument(config: &RunConfig) -> Result<(ItemBank, PromptTemplates), RunnerError> {
    let bank = match &config.item_bank {
        Some(p) => load_item_bank(p, &config.languages)?,
        None => ItemBank::builtin(),
    };
    let prompts = match &config.prompts_dir {
        Some(d) => PromptTemplates::load_dir(d)?,
        None => PromptTemplates::builtin(),
    };
    Ok((bank, prompts))
}

/// Build the client for one provider. Mock profiles are mixed with the run seed.
pub fn build_client(provider: &ProviderConfig, run_seed: u64) -> Result<Arc<dyn ChatClient>, ProviderError> {
    match &provider.backend {
        Backend::Mock(profiles) => Ok(Arc::new(MockClient::new(profiles.reseeded(run_seed)))),
        Backend::Http(endpoint) => Ok(Arc::new(HttpClient::from_env(endpoint.clone())?)),
    }
}

/// Counts requests on the way to the wrapped client.
struct Counting {
    inner: Arc<dyn ChatClient>,
    calls: AtomicU64,
}

impl ChatClient for Counting {
    fn complete(&self, request: &CompletionRequest<'_>, params: &ProviderParams) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.complete(request, params)
    }
}

/// What a run or resume did.
#[derive(Debug)]
pub struct RunOutcome {
    pub artifact: RunArtifact,
    /// Provider requests issued, keyed by provider name.
    pub provider_calls: BTreeMap<String, u64>,
    /// Records appended by this invocation.
    pub administered: usize,
    /// Providers abandoned after a fatal error.
    pub failures: Vec<FatalProviderError>,
}

impl RunOutcome {
    pub fn total_calls(&self) -> u64 {
        self.provider_calls.values().sum()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub execution: Execution,
    /// Timestamps; `None` freezes them when every provider is a mock.
    pub clock: Option<Clock>,
}

/// Run a study into `config.output_dir`. An existing artifact there is resumed.
pub fn run_survey(config: &RunConfig) -> Result<RunOutcome, RunnerError> {
    run_survey_with(config, &config.output_dir, RunOptions::default(), None)
}

/// Fill the missing cells of the artifact at `dir`.
pub fn resume(dir: &Path, config: &RunConfig) -> Result<RunOutcome, RunnerError> {
    resume_with(dir, config, RunOptions::default())
}

/// [`resume`] with explicit options.
pub fn resume_with(dir: &Path, config: &RunConfig, options: RunOptions) -> Result<RunOutcome, RunnerError> {
    read_manifest(dir)?;
    run_survey_with(config, dir, options, None)
}

/// Full-control entry point. `clients`, when given, replaces the configured
/// backends (one per provider, in config order).
pub fn run_survey_with(
    config: &RunConfig,
    dir: &Path,
    options: RunOptions,
    clients: Option<Vec<Arc<dyn ChatClient>>>,
) -> Result<RunOutcome, RunnerError> {
    config.validate()?;
    let (bank, prompts) = load_instrument(config)?;
    let clock = options.clock.unwrap_or(if config.all_mock() { Clock::Frozen } else { Clock::System });
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let cells = enumerate_cells(config, &bank);

    let mut manifest = match read_manifest(dir) {
        Ok(m) => {
            if let Some(diff) = m.incompatibility(config, &bank, &prompts) {
                return Err(RunnerError::ManifestMismatch(diff));
            }
            m
        }
        Err(RunnerError::MissingManifest(_)) => Manifest {
            format_version: FORMAT_VERSION,
            generator: format!("holland-core {}", env!("CARGO_PKG_VERSION")),
            started_at: clock.now(),
            finished_at: None,
            item_bank_sha256: bank.fingerprint(),
            prompts_sha256: prompts_fingerprint(&prompts),
            expected_cells: cells.len(),
            config: config.clone(),
        },
        Err(e) => return Err(e),
    };
    write_manifest(dir, &manifest)?;

    let log_path = dir.join(RECORDS_FILE);
    let (mut records, valid_len) = read_records(&log_path)?;
    let have: HashSet<CellKey> = records.iter().map(AdministrationRecord::key).collect();
    let mut writer = LogWriter::open(&log_path, valid_len)?;

    let mut provider_calls = BTreeMap::new();
    let mut failures = Vec::new();
    let mut administered = 0;
    for (pi, provider) in config.providers.iter().enumerate() {
        let name = provider.params.name.clone();
        provider_calls.insert(name.clone(), 0);
        let pending: Vec<&CellKey> = cells.iter().filter(|k| k.provider == name && !have.contains(k)).collect();
        if pending.is_empty() {
            continue;
        }
        let inner = match &clients {
            Some(list) => list[pi].clone(),
            None => match build_client(provider, config.seed) {
                Ok(c) => c,
                Err(e) => {
                    failures.push(FatalProviderError { provider: name, source: e });
                    continue;
                }
            },
        };
        let client = Counting { inner, calls: AtomicU64::new(0) };
        let job = ProviderJob {
            client: &client,
            params: &provider.params,
            bank: &bank,
            prompts: &prompts,
            clock,
            limiter: RateLimiter::new(provider.params.rate_limit),
        };
        let workers = match options.execution {
            Execution::Sequential => 1,
            Execution::Parallel => config.max_in_flight,
        };
        let (new_records, fatal) = job.run(&pending, workers, &mut writer)?;
        administered += new_records.len();
        records.extend(new_records);
        if let Some(f) = fatal {
            failures.push(f);
        }
        provider_calls.insert(name, client.calls.load(Ordering::Relaxed));
    }
    writer.sync()?;

    manifest.finished_at = Some(clock.now());
    write_manifest(dir, &manifest)?;
    Ok(RunOutcome {
        artifact: RunArtifact { dir: dir.to_path_buf(), manifest, records },
        provider_calls,
        administered,
        failures,
    })
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), RunnerError> {
    let path = dir.join(MANIFEST_FILE);
    let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))
}

/// Sole owner of the record log.
struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
    last_sync: Instant,
}

impl LogWriter {
    fn open(path: &Path, valid_len: u64) -> Result<Self, RunnerError> {
        let mut file = OpenOptions::new().create(true).read(true).write(true).truncate(false).open(path).map_err(io_err(path))?;
        let len = file.metadata().map_err(io_err(path))?.len();
        if len > valid_len {
            // Drop a torn final line left by an interrupted run.
            file.set_len(valid_len).map_err(io_err(path))?;
        }
        file.seek(SeekFrom::Start(valid_len)).map_err(io_err(path))?;
        if valid_len > 0 {
            let mut last = [0u8; 1];
            file.seek(SeekFrom::Start(valid_len - 1)).map_err(io_err(path))?;
            std::io::Read::read_exact(&mut file, &mut last).map_err(io_err(path))?;
            file.seek(SeekFrom::End(0)).map_err(io_err(path))?;
            if last[0] != b'\n' {
                file.write_all(b"\n").map_err(io_err(path))?;
            }
        }
        Ok(Self { path: path.to_path_buf(), out: BufWriter::new(file), last_sync: Instant::now() })
    }

    fn append(&mut self, record: &AdministrationRecord) -> Result<(), RunnerError> {
        let line = serde_json::to_string(record).expect("record serializes");
        self.out.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        self.out.write_all(b"\n").map_err(io_err(&self.path))
    }

    /// Hand buffered lines to the OS; fsync at most once a second.
    fn flush(&mut self) -> Result<(), RunnerError> {
        self.out.flush().map_err(io_err(&self.path))?;
        if self.last_sync.elapsed() >= Duration::from_secs(1) {
            self.sync()?;
        }
        Ok(())
    }

    fn sync(&mut self) -> Result<(), RunnerError> {
        self.out.flush().map_err(io_err(&self.path))?;
        self.out.get_ref().sync_data().map_err(io_err(&self.path))?;
        self.last_sync = Instant::now();
        Ok(())
    }
}

struct ProviderJob<'a> {
    client: &'a Counting,
    params: &'a ProviderParams,
    bank: &'a ItemBank,
    prompts: &'a PromptTemplates,
    clock: Clock,
    limiter: RateLimiter,
}

type CellResult = Result<AdministrationRecord, FatalProviderError>;

impl ProviderJob<'_> {
    fn administer(&self, key: &CellKey) -> CellResult {
        let item = self.bank.get(key.item_id).expect("cell enumerated from this bank");
        let prompt = self.prompts.render(item, key.mode, key.language);
        administer_item(self.client, item, &prompt, self.params, key.replication, &self.limiter, self.clock)
    }

    /// Administer `pending` with up to `workers` in flight. Records are written
    /// in cell order as soon as every earlier cell is done. A fatal error stops
    /// the issue of new cells; records already produced are kept.
    fn run(
        &self,
        pending: &[&CellKey],
        workers: usize,
        writer: &mut LogWriter,
    ) -> Result<(Vec<AdministrationRecord>, Option<FatalProviderError>), RunnerError> {
        let mut written = Vec::new();
        let mut fatal = None;
        if workers <= 1 {
            for key in pending {
                match self.administer(key) {
                    Ok(rec) => {
                        writer.append(&rec)?;
                        writer.flush()?;
                        written.push(rec);
                    }
                    Err(e) => {
                        fatal = Some(e);
                        break;
                    }
                }
            }
            return Ok((written, fatal));
        }

        let next = AtomicUsize::new(0);
        let stop = AtomicBool::new(false);
        let (tx, rx) = mpsc::channel::<(usize, CellResult)>();
        let mut io_error = None;
        std::thread::scope(|scope| {
            for _ in 0..workers.min(pending.len()) {
                let tx = tx.clone();
                let (next, stop) = (&next, &stop);
                scope.spawn(move || loop {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= pending.len() {
                        break;
                    }
                    let result = self.administer(pending[i]);
                    if result.is_err() {
                        stop.store(true, Ordering::SeqCst);
                    }
                    if tx.send((i, result)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);

            let mut buffer: BTreeMap<usize, AdministrationRecord> = BTreeMap::new();
            let mut cursor = 0;
            let mut failed_at: Option<usize> = None;
            for (i, result) in rx {
                match result {
                    Ok(rec) => {
                        buffer.insert(i, rec);
                    }
                    Err(e) => {
                        if failed_at.is_none_or(|f| i < f) {
                            failed_at = Some(i);
                            fatal = Some(e);
                        }
                    }
                }
                let mut progressed = false;
                while let Some(rec) = buffer.remove(&cursor) {
                    if io_error.is_none() {
                        if let Err(e) = writer.append(&rec) {
                            io_error = Some(e);
                            stop.store(true, Ordering::SeqCst);
                        }
                    }
                    written.push(rec);
                    cursor += 1;
                    progressed = true;
                }
                if progressed && io_error.is_none() {
                    if let Err(e) = writer.flush() {
                        io_error = Some(e);
                        stop.store(true, Ordering::SeqCst);
                    }
                }
            }
            // Records completed past a failed cell are still valid.
            for (_, rec) in std::mem::take(&mut buffer) {
                if io_error.is_none() {
                    if let Err(e) = writer.append(&rec) {
                        io_error = Some(e);
                    }
                }
                written.push(rec);
            }
        });
        if let Some(e) = io_error {
            return Err(e);
        }
        writer.flush()?;
        Ok((written, fatal))
    }
}
