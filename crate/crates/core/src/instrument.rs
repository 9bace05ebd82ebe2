//! The 60-item Interest Profiler short form: item bank, prompt rendering,
//! and Likert response parsing.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of items on the short form.
pub const ITEM_COUNT: usize = 60;
/// Items per RIASEC category.
pub const ITEMS_PER_CATEGORY: usize = 10;

const BUILTIN_BANK: &str = include_str!("../data/oip_short_form.csv");
const BUILTIN_INTEREST_EN: &str = include_str!("../data/prompts/interest_en.txt");
const BUILTIN_INTEREST_ZH: &str = include_str!("../data/prompts/interest_zh.txt");
const BUILTIN_COMPETENCE_EN: &str = include_str!("../data/prompts/competence_en.txt");
const BUILTIN_COMPETENCE_ZH: &str = include_str!("../data/prompts/competence_zh.txt");

/// Placeholder replaced by the item text in prompt templates.
pub const ITEM_PLACEHOLDER: &str = "{item}";

#[derive(Debug, Error)]
pub enum InstrumentError {
    #[error("item bank not found: {0}")]
    MissingFile(PathBuf),
    #[error("item bank schema violation at {location}: {reason}")]
    SchemaViolation { location: String, reason: String },
    #[error("item bank must have {ITEMS_PER_CATEGORY} items per category, found {}", format_counts(.counts))]
    CategoryCountMismatch {
        counts: BTreeMap<RiasecCategory, usize>,
    },
    #[error("prompt template {path}: {reason}")]
    Template { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_counts(counts: &BTreeMap<RiasecCategory, usize>) -> String {
    counts
        .iter()
        .map(|(c, n)| format!("{}={}", c.letter(), n))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Holland's six interest categories, in R-I-A-S-E-C order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiasecCategory {
    Realistic,
    Investigative,
    Artistic,
    Social,
    Enterprising,
    Conventional,
}

impl RiasecCategory {
    pub const ALL: [RiasecCategory; 6] = [
        RiasecCategory::Realistic,
        RiasecCategory::Investigative,
        RiasecCategory::Artistic,
        RiasecCategory::Social,
        RiasecCategory::Enterprising,
        RiasecCategory::Conventional,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            RiasecCategory::Realistic => 'R',
            RiasecCategory::Investigative => 'I',
            RiasecCategory::Artistic => 'A',
            RiasecCategory::Social => 'S',
            RiasecCategory::Enterprising => 'E',
            RiasecCategory::Conventional => 'C',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|cat| cat.letter() == c.to_ascii_uppercase())
    }

    pub fn name(self) -> &'static str {
        match self {
            RiasecCategory::Realistic => "Realistic",
            RiasecCategory::Investigative => "Investigative",
            RiasecCategory::Artistic => "Artistic",
            RiasecCategory::Social => "Social",
            RiasecCategory::Enterprising => "Enterprising",
            RiasecCategory::Conventional => "Conventional",
        }
    }
}

impl fmt::Display for RiasecCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RiasecCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.chars().count() == 1 {
            if let Some(c) = t.chars().next().and_then(Self::from_letter) {
                return Ok(c);
            }
        }
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| format!("unknown RIASEC category {s:?}"))
    }
}

/// Administration language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "en", alias = "english", alias = "English")]
    English,
    #[serde(rename = "zh", alias = "chinese", alias = "Chinese")]
    Chinese,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::English, Language::Chinese];

    pub fn code(self) -> &'static str {
        match self {
            Language::English => "en",
            Language::Chinese => "zh",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" | "english" => Ok(Language::English),
            "zh" | "chinese" => Ok(Language::Chinese),
            _ => Err(format!("unknown language {s:?}")),
        }
    }
}

/// What the respondent is asked to rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Interest,
    Competence,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Interest, Mode::Competence];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Interest => "interest",
            Mode::Competence => "competence",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "interest" => Ok(Mode::Interest),
            "competence" => Ok(Mode::Competence),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

/// A point on the 5-point scale, 1 = Strongly Dislike ... 5 = Strongly Like.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LikertValue(u8);

const LABELS_EN: [&str; 5] = ["Strongly Dislike", "Dislike", "Unsure", "Like", "Strongly Like"];
const LABELS_ZH: [&str; 5] = ["非常不喜欢", "不喜欢", "不确定", "喜欢", "非常喜欢"];

impl LikertValue {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 5;

    pub fn new(v: u8) -> Option<Self> {
        (Self::MIN..=Self::MAX).contains(&v).then_some(Self(v))
    }

    pub fn all() -> impl Iterator<Item = LikertValue> {
        (Self::MIN..=Self::MAX).map(LikertValue)
    }

    /// Nearest scale point to a real number, clamped to [1, 5].
    pub fn nearest(x: f64) -> Self {
        let r = x.clamp(1.0, 5.0).round();
        Self(r as u8)
    }

    pub fn numeric(self) -> u8 {
        self.0
    }

    pub fn label(self, language: Language) -> &'static str {
        match language {
            Language::English => LABELS_EN[self.0 as usize - 1],
            Language::Chinese => LABELS_ZH[self.0 as usize - 1],
        }
    }

    pub fn label_en(self) -> &'static str {
        self.label(Language::English)
    }

    pub fn label_zh(self) -> &'static str {
        self.label(Language::Chinese)
    }
}

impl TryFrom<u8> for LikertValue {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        LikertValue::new(v).ok_or_else(|| format!("Likert value {v} outside 1-5"))
    }
}

impl From<LikertValue> for u8 {
    fn from(v: LikertValue) -> u8 {
        v.0
    }
}

/// One work task of the short form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: u32,
    pub category: RiasecCategory,
    pub text_en: String,
    pub text_zh: String,
}

impl Item {
    pub fn text(&self, language: Language) -> &str {
        match language {
            Language::English => &self.text_en,
            Language::Chinese => &self.text_zh,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ItemRow {
    id: String,
    category: String,
    text_en: String,
    text_zh: String,
}

/// The validated 60-item bank. Items are stored in id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemBank {
    items: Vec<Item>,
}

impl ItemBank {
    /// The bank shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN_BANK.as_bytes(), &Language::ALL)
            .expect("builtin item bank is valid")
    }

    pub fn from_reader<R: Read>(reader: R, languages: &[Language]) -> Result<Self, InstrumentError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| schema("header", e.to_string()))?.clone();
        let expected = ["id", "category", "text_en", "text_zh"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(schema(
                "header",
                format!("expected `{}`, found `{}`", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut items = Vec::new();
        let mut seen = HashSet::new();
        for (i, row) in rdr.deserialize::<ItemRow>().enumerate() {
            let line = format!("row {}", i + 2);
            let row = row.map_err(|e| schema(&line, e.to_string()))?;
            let id: u32 = row
                .id
                .parse()
                .map_err(|_| schema(&line, format!("id {:?} is not an integer", row.id)))?;
            if !(1..=ITEM_COUNT as u32).contains(&id) {
                return Err(schema(&line, format!("id {id} outside 1-{ITEM_COUNT}")));
            }
            if !seen.insert(id) {
                return Err(schema(&line, format!("duplicate id {id}")));
            }
            let category = row.category.parse().map_err(|e: String| schema(&line, e))?;
            let item = Item { id, category, text_en: row.text_en, text_zh: row.text_zh };
            for &lang in languages {
                if item.text(lang).is_empty() {
                    return Err(schema(&line, format!("empty {lang} text for item {id}")));
                }
            }
            items.push(item);
        }
        if items.len() != ITEM_COUNT {
            return Err(schema(
                "file",
                format!("expected {ITEM_COUNT} items, found {}", items.len()),
            ));
        }
        let mut counts: BTreeMap<RiasecCategory, usize> =
            RiasecCategory::ALL.iter().map(|&c| (c, 0)).collect();
        for item in &items {
            *counts.get_mut(&item.category).unwrap() += 1;
        }
        if counts.values().any(|&n| n != ITEMS_PER_CATEGORY) {
            return Err(InstrumentError::CategoryCountMismatch { counts });
        }
        items.sort_by_key(|it| it.id);
        Ok(Self { items })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn get(&self, id: u32) -> Option<&Item> {
        id.checked_sub(1).and_then(|i| self.items.get(i as usize))
    }

    pub fn by_category(&self, category: RiasecCategory) -> impl Iterator<Item = &Item> {
        self.items.iter().filter(move |it| it.category == category)
    }

    /// SHA-256 over the canonical CSV form, used to pin runs to a bank.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for it in &self.items {
            h.update(format!("{}\t{}\t{}\t{}\n", it.id, it.category, it.text_en, it.text_zh));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn schema(location: &str, reason: impl Into<String>) -> InstrumentError {
    InstrumentError::SchemaViolation { location: location.to_string(), reason: reason.into() }
}

/// Load and validate an item bank CSV (`id,category,text_en,text_zh`).
pub fn load_item_bank(path: &Path, languages: &[Language]) -> Result<ItemBank, InstrumentError> {
    let file = fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => InstrumentError::MissingFile(path.to_path_buf()),
        _ => InstrumentError::Io(e),
    })?;
    ItemBank::from_reader(file, languages)
}

/// A rendered prompt: the instruction template plus the item it was filled with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub instruction: String,
    pub item_text: String,
    pub mode: Mode,
    pub language: Language,
}

impl PromptText {
    /// The exact text sent to the respondent.
    pub fn text(&self) -> String {
        if self.instruction.contains(ITEM_PLACEHOLDER) {
            self.instruction.replace(ITEM_PLACEHOLDER, &self.item_text)
        } else {
            format!("{}\n\n{}", self.instruction.trim_end(), self.item_text)
        }
    }
}

/// One instruction template per (mode, language).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    interest_en: String,
    interest_zh: String,
    competence_en: String,
    competence_zh: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptTemplates {
    pub fn builtin() -> Self {
        Self {
            interest_en: BUILTIN_INTEREST_EN.to_string(),
            interest_zh: BUILTIN_INTEREST_ZH.to_string(),
            competence_en: BUILTIN_COMPETENCE_EN.to_string(),
            competence_zh: BUILTIN_COMPETENCE_ZH.to_string(),
        }
    }

    pub fn file_name(mode: Mode, language: Language) -> String {
        format!("{}_{}.txt", mode.as_str(), language.code())
    }

    /// Load `interest_en.txt`, `interest_zh.txt`, `competence_en.txt`,
    /// `competence_zh.txt` from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, InstrumentError> {
        let read = |mode, lang| -> Result<String, InstrumentError> {
            let path = dir.join(Self::file_name(mode, lang));
            let text = fs::read_to_string(&path).map_err(|e| InstrumentError::Template {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            if text.trim().is_empty() {
                return Err(InstrumentError::Template { path, reason: "empty template".into() });
            }
            if !text.contains(ITEM_PLACEHOLDER) {
                return Err(InstrumentError::Template {
                    path,
                    reason: format!("missing {ITEM_PLACEHOLDER} placeholder"),
                });
            }
            Ok(text)
        };
        Ok(Self {
            interest_en: read(Mode::Interest, Language::English)?,
            interest_zh: read(Mode::Interest, Language::Chinese)?,
            competence_en: read(Mode::Competence, Language::English)?,
            competence_zh: read(Mode::Competence, Language::Chinese)?,
        })
    }

    pub fn template(&self, mode: Mode, language: Language) -> &str {
        match (mode, language) {
            (Mode::Interest, Language::English) => &self.interest_en,
            (Mode::Interest, Language::Chinese) => &self.interest_zh,
            (Mode::Competence, Language::English) => &self.competence_en,
            (Mode::Competence, Language::Chinese) => &self.competence_zh,
        }
    }

    pub fn render(&self, item: &Item, mode: Mode, language: Language) -> PromptText {
        PromptText {
            instruction: self.template(mode, language).to_string(),
            item_text: item.text(language).to_string(),
            mode,
            language,
        }
    }
}

/// Render with the built-in templates.
pub fn render_prompt(item: &Item, mode: Mode, language: Language) -> PromptText {
    PromptTemplates::builtin().render(item, mode, language)
}

/// Why a response could not be mapped onto the scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailureKind {
    /// No label or digit found.
    Unrecognized,
    /// More than one distinct scale point mentioned.
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("unparseable response ({kind:?}): {raw:?}")]
pub struct ParseFailure {
    pub raw: String,
    pub kind: ParseFailureKind,
}

/// Map a free-text answer onto the 1-5 scale.
///
/// Accepts scale labels (case-insensitive, longest match wins where labels
/// nest, e.g. "Strongly Like" over "Like") and standalone digits 1-5. Every
/// distinct scale point mentioned counts; more than one is ambiguous.
pub fn parse_likert(text: &str, language: Language) -> Result<LikertValue, ParseFailure> {
    let mut found = label_values(text, language);
    found.extend(digit_values(text));
    found.sort_unstable();
    found.dedup();
    match found.as_slice() {
        [v] => Ok(LikertValue(*v)),
        [] => Err(ParseFailure { raw: text.to_string(), kind: ParseFailureKind::Unrecognized }),
        _ => Err(ParseFailure { raw: text.to_string(), kind: ParseFailureKind::Ambiguous }),
    }
}

fn label_values(text: &str, language: Language) -> Vec<u8> {
    let (haystack, labels): (String, Vec<String>) = match language {
        Language::English => (
            text.to_lowercase(),
            LABELS_EN.iter().map(|l| l.to_lowercase()).collect(),
        ),
        Language::Chinese => (text.to_string(), LABELS_ZH.iter().map(|l| l.to_string()).collect()),
    };
    let is_word = |c: char| c.is_alphanumeric();
    let mut spans: Vec<(usize, usize, u8)> = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        for (start, m) in haystack.match_indices(label.as_str()) {
            let end = start + m.len();
            if language == Language::English {
                let before = haystack[..start].chars().next_back();
                let after = haystack[end..].chars().next();
                if before.is_some_and(is_word) || after.is_some_and(is_word) {
                    continue;
                }
            }
            spans.push((start, end, i as u8 + 1));
        }
    }
    spans
        .iter()
        .filter(|&&(s, e, _)| {
            !spans
                .iter()
                .any(|&(s2, e2, _)| s2 <= s && e <= e2 && (e2 - s2) > (e - s))
        })
        .map(|&(_, _, v)| v)
        .collect()
}

fn digit_values(text: &str) -> Vec<u8> {
    // Scale-maximum mentions such as "4/5" or "4 out of 5" are not answers.
    let cleaned = text
        .replace("out of 5", " ")
        .replace("/ 5", " ")
        .replace("/5", " ")
        .replace("满分5分", " ");
    let chars: Vec<char> = cleaned
        .chars()
        .map(|c| match c {
            '０'..='９' => char::from_u32(c as u32 - '０' as u32 + '0' as u32).unwrap_or(c),
            _ => c,
        })
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let token: String = chars[start..i].iter().collect();
            let token = token.trim_end_matches('.');
            let before = start.checked_sub(1).map(|j| chars[j]);
            let after = chars.get(i).copied();
            let glued = |c: Option<char>| c.is_some_and(|c| c.is_ascii_alphabetic());
            if token.len() == 1 && !glued(before) && !glued(after) {
                let d = token.as_bytes()[0] - b'0';
                if (1..=5).contains(&d) {
                    out.push(d);
                }
            }
        } else {
            i += 1;
        }
    }
    out
}
