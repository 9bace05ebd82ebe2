//! Category sums, item aggregates, Holland codes, and occupation lookup.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instrument::{ItemBank, Language, Mode, RiasecCategory};
use crate::providers::AdministrationRecord;

const BUILTIN_OCCUPATIONS: &str = include_str!("../data/occupations.csv");

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("item {item_id} appears twice in replication {key}")]
    DuplicateItem { key: String, item_id: u32 },
    #[error("records passed to score_replication belong to different keys: {0} and {1}")]
    MixedKeys(String, String),
    #[error("no records to score")]
    NoRecords,
    #[error("item {0} is not in the item bank")]
    UnknownItem(u32),
    #[error("every replication is missing for {0}")]
    EmptyCell(String),
    #[error("occupation table row {row}: {reason}")]
    OccupationTable { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identity of one replication of one condition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReplicationKey {
    pub provider: String,
    pub version: String,
    pub language: Language,
    pub mode: Mode,
    pub replication: u32,
}

impl ReplicationKey {
    fn of(r: &AdministrationRecord) -> Self {
        Self {
            provider: r.provider.clone(),
            version: r.version_tag.clone(),
            language: r.language,
            mode: r.mode,
            replication: r.replication_index,
        }
    }

    pub fn condition(&self) -> ConditionKey {
        ConditionKey {
            provider: self.provider.clone(),
            version: self.version.clone(),
            language: self.language,
            mode: self.mode,
        }
    }
}

impl std::fmt::Display for ReplicationKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}/{}#{}", self.provider, self.version, self.language, self.mode, self.replication)
    }
}

/// A provider/version/language/mode combination, replications pooled.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConditionKey {
    pub provider: String,
    pub version: String,
    pub language: Language,
    pub mode: Mode,
}

impl std::fmt::Display for ConditionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}/{}", self.provider, self.version, self.language, self.mode)
    }
}

/// Per-replication category sums.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryScores {
    pub key: ReplicationKey,
    /// Sums in R-I-A-S-E-C order.
    pub sums: [u32; 6],
    pub missing_count: u32,
}

impl CategoryScores {
    pub fn sum(&self, category: RiasecCategory) -> u32 {
        self.sums[category.index()]
    }

    pub fn as_means(&self) -> [f64; 6] {
        self.sums.map(f64::from)
    }
}

/// Sum the answered values per category. Missing answers are skipped and counted.
pub fn score_replication(records: &[AdministrationRecord], bank: &ItemBank) -> Result<CategoryScores, ScoringError> {
    let first = records.first().ok_or(ScoringError::NoRecords)?;
    let key = ReplicationKey::of(first);
    let mut seen = BTreeSet::new();
    let mut sums = [0u32; 6];
    let mut missing_count = 0;
    for r in records {
        let k = ReplicationKey::of(r);
        if k != key {
            return Err(ScoringError::MixedKeys(key.to_string(), k.to_string()));
        }
        if !seen.insert(r.item_id) {
            return Err(ScoringError::DuplicateItem { key: key.to_string(), item_id: r.item_id });
        }
        let item = bank.get(r.item_id).ok_or(ScoringError::UnknownItem(r.item_id))?;
        match r.final_value {
            Some(v) => sums[item.category.index()] += u32::from(v.numeric()),
            None => missing_count += 1,
        }
    }
    Ok(CategoryScores { key, sums, missing_count })
}

/// Score every replication present in `records`, ordered by key.
pub fn score_all(records: &[AdministrationRecord], bank: &ItemBank) -> Result<Vec<CategoryScores>, ScoringError> {
    let mut groups: BTreeMap<ReplicationKey, Vec<AdministrationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(ReplicationKey::of(r)).or_default().push(r.clone());
    }
    groups.values().map(|g| score_replication(g, bank)).collect()
}

/// Replication-pooled score of one item under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemAggregate {
    pub provider: String,
    pub version: String,
    pub language: Language,
    pub mode: Mode,
    pub item_id: u32,
    pub category: RiasecCategory,
    /// Mean over answered replications.
    pub mean: f64,
    /// Answered replications.
    pub n: u32,
    /// Replications whose attempts were all exhausted.
    pub missing: u32,
}

impl ItemAggregate {
    pub fn condition(&self) -> ConditionKey {
        ConditionKey {
            provider: self.provider.clone(),
            version: self.version.clone(),
            language: self.language,
            mode: self.mode,
        }
    }
}

/// Mean over replications for every (condition, item) in `records` that
/// passes `keep`. Rows are ordered by condition, then item id.
pub fn aggregate_item_scores(
    records: &[AdministrationRecord],
    bank: &ItemBank,
    keep: impl Fn(&ConditionKey) -> bool,
) -> Result<Vec<ItemAggregate>, ScoringError> {
    let mut acc: BTreeMap<(ConditionKey, u32), (u32, u32, u32)> = BTreeMap::new();
    for r in records {
        let cond = ReplicationKey::of(r).condition();
        if !keep(&cond) {
            continue;
        }
        let e = acc.entry((cond, r.item_id)).or_default();
        match r.final_value {
            Some(v) => {
                e.0 += u32::from(v.numeric());
                e.1 += 1;
            }
            None => e.2 += 1,
        }
    }
    acc.into_iter()
        .map(|((cond, item_id), (sum, n, missing))| {
            let item = bank.get(item_id).ok_or(ScoringError::UnknownItem(item_id))?;
            if n == 0 {
                return Err(ScoringError::EmptyCell(format!("{cond} item {item_id}")));
            }
            Ok(ItemAggregate {
                provider: cond.provider,
                version: cond.version,
                language: cond.language,
                mode: cond.mode,
                item_id,
                category: item.category,
                mean: f64::from(sum) / f64::from(n),
                n,
                missing,
            })
        })
        .collect()
}

/// Category means of one condition: the average of its item means.
pub fn category_means(rows: &[ItemAggregate], condition: &ConditionKey) -> Option<[f64; 6]> {
    let mut sum = [0.0; 6];
    let mut count = [0u32; 6];
    for r in rows.iter().filter(|r| &r.condition() == condition) {
        sum[r.category.index()] += r.mean;
        count[r.category.index()] += 1;
    }
    if count.contains(&0) {
        return None;
    }
    Some(std::array::from_fn(|i| sum[i] / f64::from(count[i])))
}

/// Write `provider,version,language,mode,item_id,category,mean,n,missing`.
pub fn write_scored_csv<W: Write>(rows: &[ItemAggregate], out: W) -> Result<(), ScoringError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["provider", "version", "language", "mode", "item_id", "category", "mean", "n", "missing"])?;
    for r in rows {
        w.write_record([
            r.provider.clone(),
            r.version.clone(),
            r.language.code().to_string(),
            r.mode.as_str().to_string(),
            r.item_id.to_string(),
            r.category.name().to_string(),
            format!("{:.6}", r.mean),
            r.n.to_string(),
            r.missing.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A three-letter code with its rank-equivalence classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HollandCode {
    pub letters: [RiasecCategory; 3],
    /// Partition of `letters` into tied classes, in rank order.
    pub tie_sets: Vec<Vec<RiasecCategory>>,
    /// Categories outside the code that are tied with its last class.
    pub boundary_tie: Vec<RiasecCategory>,
    /// All six categories fall in one class.
    pub fully_tied: bool,
}

impl HollandCode {
    pub fn code(&self) -> String {
        self.letters.iter().map(|c| c.letter()).collect()
    }

    /// Every letter order consistent with the tie sets.
    pub fn orderings(&self) -> Vec<String> {
        let mut acc = vec![String::new()];
        for set in &self.tie_sets {
            let perms = permutations(set);
            acc = acc
                .iter()
                .flat_map(|prefix| {
                    perms.iter().map(move |p| {
                        let mut s = prefix.clone();
                        s.extend(p.iter().map(|c| c.letter()));
                        s
                    })
                })
                .collect();
        }
        acc
    }
}

impl std::fmt::Display for HollandCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.code())
    }
}

fn permutations(items: &[RiasecCategory]) -> Vec<Vec<RiasecCategory>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Rank the six categories and take the top three.
///
/// Categories with exactly equal means, or placed in one class by
/// `grouping` (e.g. from nonsignificant pairwise comparisons), are tied.
/// Classes are ordered by their best mean. Inside a class letters follow the
/// means, with exact ties in R-I-A-S-E-C order. When a class straddles the
/// third position, its leftover members are reported in `boundary_tie`.
pub fn holland_code(means: &[f64; 6], grouping: Option<&[Vec<RiasecCategory>]>) -> HollandCode {
    let mut order: Vec<RiasecCategory> = RiasecCategory::ALL.to_vec();
    // Stable sort keeps R-I-A-S-E-C order among exact ties.
    order.sort_by(|a, b| means[b.index()].total_cmp(&means[a.index()]));

    let mut parent: [usize; 6] = std::array::from_fn(|i| i);
    fn find(p: &mut [usize; 6], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    let mut union = |a: usize, b: usize| {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    };
    for a in 0..6 {
        for b in (a + 1)..6 {
            if means[a] == means[b] {
                union(a, b);
            }
        }
    }
    for group in grouping.unwrap_or(&[]) {
        for w in group.windows(2) {
            union(w[0].index(), w[1].index());
        }
    }

    // Classes in order of their best member.
    let mut classes: Vec<Vec<RiasecCategory>> = Vec::new();
    let mut class_of: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in &order {
        let root = find(&mut parent, c.index());
        let slot = *class_of.entry(root).or_insert_with(|| {
            classes.push(Vec::new());
            classes.len() - 1
        });
        classes[slot].push(c);
    }

    let mut letters = Vec::with_capacity(3);
    let mut tie_sets = Vec::new();
    let mut boundary_tie = Vec::new();
    for class in &classes {
        if letters.len() == 3 {
            break;
        }
        let take = (3 - letters.len()).min(class.len());
        letters.extend_from_slice(&class[..take]);
        tie_sets.push(class[..take].to_vec());
        boundary_tie = class[take..].to_vec();
    }
    HollandCode {
        letters: [letters[0], letters[1], letters[2]],
        tie_sets,
        boundary_tie,
        fully_tied: classes.len() == 1,
    }
}

/// Occupations keyed by three-letter code.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OccupationTable {
    pub entries: BTreeMap<String, Vec<String>>,
}

fn valid_code(code: &str) -> bool {
    let cats: Vec<_> = code.chars().filter_map(RiasecCategory::from_letter).collect();
    code.chars().count() == 3 && cats.len() == 3 && cats.iter().collect::<BTreeSet<_>>().len() == 3
}

impl OccupationTable {
    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN_OCCUPATIONS.as_bytes()).expect("builtin occupation table is valid")
    }

    /// Parse CSV `code,occupation`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, ScoringError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["code", "occupation"] {
            return Err(ScoringError::OccupationTable { row: 1, reason: "header must be code,occupation".into() });
        }
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let code = rec.get(0).unwrap_or("").trim().to_ascii_uppercase();
            let occupation = rec.get(1).unwrap_or("").trim().to_string();
            if !valid_code(&code) {
                return Err(ScoringError::OccupationTable { row, reason: format!("invalid code {code:?}") });
            }
            if occupation.is_empty() {
                return Err(ScoringError::OccupationTable { row, reason: "empty occupation".into() });
            }
            let list = entries.entry(code).or_default();
            if !list.contains(&occupation) {
                list.push(occupation);
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ScoringError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn get(&self, code: &str) -> Option<&[String]> {
        self.entries.get(code).map(Vec::as_slice)
    }

    /// Share of the 120 possible codes that have at least one occupation.
    pub fn coverage(&self) -> (usize, usize) {
        (self.entries.len(), 120)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupationMatch {
    /// Codes looked up, in tie-set order.
    pub codes: Vec<String>,
    /// Union of occupations, first occurrence order.
    pub occupations: Vec<String>,
    /// Codes with no entry in the table.
    pub uncovered_codes: Vec<String>,
    /// No occupation found at all.
    pub uncovered: bool,
}

/// Occupations for every ordering consistent with the code's tie sets.
pub fn match_occupations(code: &HollandCode, table: &OccupationTable) -> OccupationMatch {
    let codes = code.orderings();
    let mut occupations = Vec::new();
    let mut uncovered_codes = Vec::new();
    for c in &codes {
        match table.get(c) {
            Some(list) => {
                for o in list {
                    if !occupations.contains(o) {
                        occupations.push(o.clone());
                    }
                }
            }
            None => uncovered_codes.push(c.clone()),
        }
    }
    let uncovered = occupations.is_empty();
    OccupationMatch { codes, occupations, uncovered_codes, uncovered }
}

/// Code of each replication from its raw sums.
pub fn replication_codes(scores: &[CategoryScores]) -> Vec<(ReplicationKey, HollandCode)> {
    scores.iter().map(|s| (s.key.clone(), holland_code(&s.as_means(), None))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::LikertValue;
    use crate::providers::{Attempt, AttemptOutcome, FORMAT_VERSION};
    use proptest::prelude::*;
    use RiasecCategory::*;

    fn record(item_id: u32, replication: u32, value: Option<u8>) -> AdministrationRecord {
        let final_value = value.and_then(LikertValue::new);
        AdministrationRecord {
            format_version: FORMAT_VERSION,
            provider: "p".into(),
            model_id: "m".into(),
            version_tag: "v".into(),
            language: Language::English,
            mode: Mode::Interest,
            item_id,
            replication_index: replication,
            attempts: final_value
                .map(|v| Attempt { raw_text: v.label_en().into(), outcome: AttemptOutcome::Parsed { value: v } })
                .into_iter()
                .collect(),
            final_value,
            timestamp: String::new(),
        }
    }

    fn replication(f: impl Fn(RiasecCategory) -> u8) -> Vec<AdministrationRecord> {
        let bank = ItemBank::builtin();
        bank.items().iter().map(|it| record(it.id, 1, Some(f(it.category)))).collect()
    }

    #[test]
    fn constant_and_separated_sums() {
        let bank = ItemBank::builtin();
        let s = score_replication(&replication(|_| 3), &bank).unwrap();
        assert_eq!(s.sums, [30; 6]);
        let s = score_replication(&replication(|_| 4), &bank).unwrap();
        assert_eq!(s.sums, [40; 6]);
        let s = score_replication(&replication(|c| if c == Artistic { 5 } else { 1 }), &bank).unwrap();
        assert_eq!(s.sums, [10, 10, 50, 10, 10, 10]);
    }

    #[test]
    fn missing_excluded_and_counted() {
        let bank = ItemBank::builtin();
        let mut recs = replication(|_| 2);
        recs[0] = record(recs[0].item_id, 1, None);
        let s = score_replication(&recs, &bank).unwrap();
        assert_eq!(s.missing_count, 1);
        assert_eq!(s.sums.iter().sum::<u32>(), 2 * 59);
    }

    #[test]
    fn duplicate_item_rejected() {
        let bank = ItemBank::builtin();
        let mut recs = replication(|_| 2);
        recs.push(recs[3].clone());
        assert!(matches!(score_replication(&recs, &bank), Err(ScoringError::DuplicateItem { .. })));
    }

    #[test]
    fn aggregate_means_and_empty_cell() {
        let bank = ItemBank::builtin();
        let recs = vec![record(1, 1, Some(3)), record(1, 2, Some(5)), record(2, 1, Some(4)), record(2, 2, None)];
        let rows = aggregate_item_scores(&recs, &bank, |_| true).unwrap();
        assert_eq!(rows[0].mean, 4.0);
        assert_eq!((rows[1].mean, rows[1].n, rows[1].missing), (4.0, 1, 1));
        let empty = vec![record(1, 1, None), record(1, 2, None)];
        assert!(matches!(aggregate_item_scores(&empty, &bank, |_| true), Err(ScoringError::EmptyCell(_))));
    }

    #[test]
    fn scored_csv_schema() {
        let bank = ItemBank::builtin();
        let rows = aggregate_item_scores(&[record(1, 1, Some(4))], &bank, |_| true).unwrap();
        let mut buf = Vec::new();
        write_scored_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "provider,version,language,mode,item_id,category,mean,n,missing");
        assert_eq!(text.lines().nth(1).unwrap(), "p,v,en,interest,1,Realistic,4.000000,1,0");
    }

    #[test]
    fn table_one_means_give_sai() {
        let code = holland_code(&[3.530, 3.555, 3.830, 3.920, 3.270, 3.420], None);
        assert_eq!(code.code(), "SAI");
        assert_eq!(code.tie_sets, vec![vec![Social], vec![Artistic], vec![Investigative]]);
        assert!(code.boundary_tie.is_empty());
    }

    #[test]
    fn all_equal_is_fully_tied() {
        let code = holland_code(&[3.0; 6], None);
        assert_eq!(code.code(), "RIA");
        assert_eq!(code.tie_sets, vec![vec![Realistic, Investigative, Artistic]]);
        assert_eq!(code.boundary_tie, vec![Social, Enterprising, Conventional]);
        assert!(code.fully_tied);
    }

    #[test]
    fn grouping_forms_one_tie_set() {
        let means = [3.530, 3.555, 3.830, 3.920, 3.270, 3.420];
        let code = holland_code(&means, Some(&[vec![Social, Artistic, Investigative]]));
        assert_eq!(code.code(), "SAI");
        assert_eq!(code.tie_sets, vec![vec![Social, Artistic, Investigative]]);
        assert!(!code.fully_tied);
    }

    #[test]
    fn straddling_class_reports_boundary() {
        // S alone on top, then A=I=C exactly tied.
        let code = holland_code(&[2.0, 3.0, 3.0, 4.0, 1.0, 3.0], None);
        assert_eq!(code.code(), "SIA");
        assert_eq!(code.tie_sets, vec![vec![Social], vec![Investigative, Artistic]]);
        assert_eq!(code.boundary_tie, vec![Conventional]);
    }

    #[test]
    fn occupation_lookup() {
        let table = OccupationTable::builtin();
        let sai = holland_code(&[3.530, 3.555, 3.830, 3.920, 3.270, 3.420], None);
        let m = match_occupations(&sai, &table);
        assert!(m.occupations.iter().any(|o| o == "Art Therapists"));
        assert!(!m.uncovered);

        let asi = holland_code(&[1.0, 3.0, 5.0, 4.0, 1.0, 1.0], None);
        assert_eq!(asi.code(), "ASI");
        let m = match_occupations(&asi, &table);
        assert!(m.uncovered && m.occupations.is_empty());
        assert_eq!(m.uncovered_codes, vec!["ASI"]);

        let tied = holland_code(&[3.0, 3.5, 3.8, 3.9, 2.0, 2.0], Some(&[vec![Social, Artistic, Investigative]]));
        let m = match_occupations(&tied, &table);
        let mut codes = m.codes.clone();
        codes.sort();
        assert_eq!(codes, ["AIS", "ASI", "IAS", "ISA", "SAI", "SIA"]);
        assert_eq!(m.uncovered_codes.len(), 2);
        for c in ["SAI", "SIA", "ISA", "IAS"] {
            for o in table.get(c).unwrap() {
                assert!(m.occupations.contains(o));
            }
        }
    }

    #[test]
    fn bad_occupation_code_rejected() {
        let csv = "code,occupation\nSSA,Nothing\n";
        assert!(OccupationTable::from_reader(csv.as_bytes()).is_err());
    }

    fn arb_means() -> impl Strategy<Value = [f64; 6]> {
        // Coarse grid so exact ties occur often.
        prop::array::uniform6((4u32..=20).prop_map(|k| f64::from(k) / 4.0))
    }

    fn arb_grouping() -> impl Strategy<Value = Vec<Vec<RiasecCategory>>> {
        prop::collection::vec(prop::collection::vec(0usize..6, 1..4), 0..3)
            .prop_map(|gs| gs.into_iter().map(|g| g.into_iter().map(|i| RiasecCategory::ALL[i]).collect()).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn code_is_affine_invariant(means in arb_means(), grouping in arb_grouping(), a in 0.25f64..8.0, b in -5.0f64..5.0) {
            // Powers of two keep the grid exact under scaling.
            let a = 2f64.powi(a.log2().round() as i32);
            let b = (b * 4.0).round() / 4.0;
            let scaled = means.map(|m| a * m + b);
            prop_assert_eq!(holland_code(&means, Some(&grouping)), holland_code(&scaled, Some(&grouping)));
        }

        #[test]
        fn tie_sets_partition_letters(means in arb_means(), grouping in arb_grouping()) {
            let code = holland_code(&means, Some(&grouping));
            let flat: Vec<_> = code.tie_sets.iter().flatten().copied().collect();
            prop_assert_eq!(flat.as_slice(), code.letters.as_slice());
            let distinct: BTreeSet<_> = code.letters.iter().collect();
            prop_assert_eq!(distinct.len(), 3);
            // No category outside the code beats one inside it.
            let worst = code.letters.iter().map(|c| means[c.index()]).fold(f64::INFINITY, f64::min);
            if grouping.is_empty() {
                for c in RiasecCategory::ALL {
                    if !code.letters.contains(&c) {
                        prop_assert!(means[c.index()] <= worst);
                    }
                }
            }
        }

        #[test]
        fn sums_add_up_and_ignore_order(values in prop::collection::vec(1u8..=5, 60), seed in any::<u64>()) {
            let bank = ItemBank::builtin();
            let mut recs: Vec<_> = bank.items().iter().zip(&values).map(|(it, &v)| record(it.id, 1, Some(v))).collect();
            let total: u32 = values.iter().map(|&v| u32::from(v)).sum();
            let s = score_replication(&recs, &bank).unwrap();
            prop_assert_eq!(s.sums.iter().sum::<u32>(), total);
            let k = (seed % 60) as usize;
            recs.rotate_left(k);
            prop_assert_eq!(score_replication(&recs, &bank).unwrap(), s);
        }
    }
}
