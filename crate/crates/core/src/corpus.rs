//! Headline datasets: loading, per-group median labeling and k-fold splits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub id: String,
    pub title: String,
    /// Views, comment count or any other non-negative popularity metric.
    pub metric: f64,
    /// Grouping key for the median split (publication month, publisher...).
    pub group: String,
}

impl Headline {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        metric: f64,
        group: impl Into<String>,
    ) -> Result<Self> {
        let h = Headline {
            id: id.into(),
            title: title.into(),
            metric,
            group: group.into(),
        };
        h.validate().map_err(Error::Data)?;
        Ok(h)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.title.trim().is_empty() {
            return Err(format!("record {:?}: empty title", self.id));
        }
        if !self.metric.is_finite() || self.metric < 0.0 {
            return Err(format!(
                "record {:?}: metric must be a finite non-negative number, got {}",
                self.id, self.metric
            ));
        }
        if self.group.is_empty() {
            return Err(format!("record {:?}: empty group", self.id));
        }
        Ok(())
    }
}

/// Binary popularity class. Serialized as 0 / 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Unpopular,
    Popular,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Unpopular => 0.0,
            Label::Popular => 1.0,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_bool(popular: bool) -> Self {
        if popular {
            Label::Popular
        } else {
            Label::Unpopular
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Unpopular => "unpopular",
            Label::Popular => "popular",
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::Unpopular),
            1 => Ok(Label::Popular),
            other => Err(Error::Data(format!("label must be 0 or 1, got {other}"))),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::try_from(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    #[serde(flatten)]
    pub headline: Headline,
    pub label: Label,
}

impl LabeledExample {
    pub fn new(headline: Headline, label: Label) -> Self {
        LabeledExample { headline, label }
    }

    pub fn title(&self) -> &str {
        &self.headline.title
    }

    pub fn id(&self) -> &str {
        &self.headline.id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    /// Guesses from the file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    title: String,
    metric: f64,
    group: String,
    #[serde(default)]
    label: Option<u8>,
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<Headline>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        DatasetFormat::Jsonl => parse_jsonl(&text),
        DatasetFormat::Csv => parse_csv(&text),
    }
}

/// Parses JSONL records (`id`, `title`, `metric`, `group`). Blank lines are
/// skipped; an optional `label` key is accepted and ignored here.
pub fn parse_jsonl(text: &str) -> Result<Vec<Headline>> {
    Ok(parse_jsonl_records(text)?
        .into_iter()
        .map(|(h, _)| h)
        .collect())
}

fn parse_jsonl_records(text: &str) -> Result<Vec<(Headline, Option<u8>)>> {
    let mut out = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        let (h, label) = finish_record(raw, line_no, &mut seen)?;
        out.push((h, label));
    }
    Ok(out)
}

fn finish_record(
    raw: RawRecord,
    line: usize,
    seen: &mut HashMap<String, usize>,
) -> Result<(Headline, Option<u8>)> {
    let h = Headline {
        id: raw.id,
        title: raw.title,
        metric: raw.metric,
        group: raw.group,
    };
    h.validate().map_err(|m| Error::parse(line, m))?;
    if seen.insert(h.id.clone(), line).is_some() {
        return Err(Error::DuplicateId { id: h.id, line });
    }
    Ok((h, raw.label))
}

/// Parses CSV with the exact header `id,title,metric,group` (optionally
/// followed by `label`).
pub fn parse_csv(text: &str) -> Result<Vec<Headline>> {
    Ok(parse_csv_records(text)?.into_iter().map(|(h, _)| h).collect())
}

fn parse_csv_records(text: &str) -> Result<Vec<(Headline, Option<u8>)>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["id", "title", "metric", "group"] && names != ["id", "title", "metric", "group", "label"] {
        return Err(Error::parse(
            1,
            format!("expected header id,title,metric,group, got {}", names.join(",")),
        ));
    }
    let mut out = Vec::new();
    let mut seen = HashMap::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw: RawRecord = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::parse(line, e.to_string()))?;
        out.push(finish_record(raw, line, &mut seen)?);
    }
    Ok(out)
}

/// Loads a dataset whose records may already carry labels. If every record
/// has a `label`, those are used; if none do, labels come from
/// [`label_by_group_median`]. A mix is an error.
pub fn load_labeled(path: &Path, format: DatasetFormat) -> Result<Vec<LabeledExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records = match format {
        DatasetFormat::Jsonl => parse_jsonl_records(&text)?,
        DatasetFormat::Csv => parse_csv_records(&text)?,
    };
    let labeled = records.iter().filter(|(_, l)| l.is_some()).count();
    if labeled == 0 {
        let headlines = records.into_iter().map(|(h, _)| h).collect();
        return label_by_group_median(headlines);
    }
    if labeled != records.len() {
        return Err(Error::Data(format!(
            "{labeled} of {} records carry a label; expected all or none",
            records.len()
        )));
    }
    records
        .into_iter()
        .map(|(h, l)| Ok(LabeledExample::new(h, Label::try_from(l.unwrap())?)))
        .collect()
}

/// Writes labeled examples as JSONL (headline fields plus `label`).
pub fn to_jsonl(examples: &[LabeledExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&serde_json::to_string(ex).expect("labeled example serializes"));
        out.push('\n');
    }
    out
}

/// Median of a non-empty slice; even sizes average the two middle values.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Labels each headline popular iff its metric strictly exceeds the median
/// metric of its group. Output order follows input order.
pub fn label_by_group_median(data: Vec<Headline>) -> Result<Vec<LabeledExample>> {
    if data.is_empty() {
        return Err(Error::Data("cannot label an empty dataset".into()));
    }
    let mut groups: HashMap<&str, Vec<f64>> = HashMap::new();
    for h in &data {
        groups.entry(h.group.as_str()).or_default().push(h.metric);
    }
    let medians: HashMap<String, f64> = groups
        .into_iter()
        .map(|(g, metrics)| (g.to_string(), median(&metrics)))
        .collect();
    Ok(data
        .into_iter()
        .map(|h| {
            let label = Label::from_bool(h.metric > medians[&h.group]);
            LabeledExample::new(h, label)
        })
        .collect())
}

/// Assignment of every example id to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignments.get(id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Splits `data` into (train, test) for fold `fold`, preserving input order.
    pub fn split<'a>(
        &self,
        data: &'a [LabeledExample],
        fold: usize,
    ) -> (Vec<&'a LabeledExample>, Vec<&'a LabeledExample>) {
        data.iter()
            .partition(|ex| self.fold_of(ex.id()) != Some(fold))
    }
}

/// Seeded Fisher-Yates shuffle driven by `gen_range`, so the permutation is
/// fixed for a given seed regardless of platform.
pub(crate) fn fisher_yates<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

pub fn make_folds(data: &[LabeledExample], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if k > data.len() {
        return Err(Error::Config(format!(
            "k = {k} exceeds dataset size {}",
            data.len()
        )));
    }
    let mut ids: Vec<&str> = data.iter().map(LabeledExample::id).collect();
    let unique: HashSet<&str> = ids.iter().copied().collect();
    if unique.len() != ids.len() {
        return Err(Error::Data("example ids are not unique".into()));
    }
    ids.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fisher_yates(&mut ids, &mut rng);
    let assignments = ids
        .into_iter()
        .enumerate()
        .map(|(pos, id)| (id.to_string(), pos % k))
        .collect();
    Ok(FoldPlan {
        k,
        seed,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h(id: &str, metric: f64, group: &str) -> Headline {
        Headline::new(id, format!("title {id}"), metric, group).unwrap()
    }

    fn labels(ex: &[LabeledExample]) -> Vec<u8> {
        ex.iter().map(|e| e.label.as_u8()).collect()
    }

    #[test]
    fn parses_table_headline() {
        let line = r#"{"id":"a1","title":"This teen crossed a dangerous highway to play ‘Pokémon Go’ — and then was hit by a car","metric":20836692,"group":"2016-07"}"#;
        let data = parse_jsonl(line).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data[0].metric, 20836692.0);
        assert_eq!(data[0].group, "2016-07");
    }

    #[test]
    fn empty_input_is_empty_list() {
        assert!(parse_jsonl("").unwrap().is_empty());
        assert!(parse_csv("").unwrap().is_empty());
    }

    #[test]
    fn negative_metric_reports_line() {
        let text = "{\"id\":\"a\",\"title\":\"ok\",\"metric\":1,\"group\":\"g\"}\n\
                    {\"id\":\"b\",\"title\":\"ok\",\"metric\":-3,\"group\":\"g\"}\n";
        match parse_jsonl(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_missing_and_duplicate() {
        assert!(matches!(parse_jsonl("{not json"), Err(Error::Parse { line: 1, .. })));
        let missing = r#"{"id":"a","title":"t","group":"g"}"#;
        assert!(matches!(parse_jsonl(missing), Err(Error::Parse { line: 1, .. })));
        let dup = "{\"id\":\"a\",\"title\":\"t\",\"metric\":1,\"group\":\"g\"}\n\
                   {\"id\":\"a\",\"title\":\"u\",\"metric\":2,\"group\":\"g\"}";
        assert!(matches!(parse_jsonl(dup), Err(Error::DuplicateId { line: 2, .. })));
        let blank_title = r#"{"id":"a","title":"   ","metric":1,"group":"g"}"#;
        assert!(parse_jsonl(blank_title).is_err());
    }

    #[test]
    fn csv_with_header() {
        let text = "id,title,metric,group\na,\"Hello, world\",3,2016-01\nb,Second,4.5,2016-01\n";
        let data = parse_csv(text).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data[0].title, "Hello, world");
        assert_eq!(data[1].metric, 4.5);
        assert!(parse_csv("title,id,metric,group\n").is_err());
        match parse_csv("id,title,metric,group\na,x,1,g\nb,y,-1,g\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn median_split_even_group() {
        let data = vec![h("a", 10.0, "g"), h("b", 20.0, "g"), h("c", 30.0, "g"), h("d", 40.0, "g")];
        assert_eq!(labels(&label_by_group_median(data).unwrap()), [0, 0, 1, 1]);
    }

    #[test]
    fn ties_at_median_are_unpopular() {
        let data = vec![h("a", 5.0, "g"), h("b", 5.0, "g"), h("c", 5.0, "g")];
        assert_eq!(labels(&label_by_group_median(data).unwrap()), [0, 0, 0]);
    }

    #[test]
    fn groups_are_independent() {
        let data = vec![
            h("a1", 1.0, "a"),
            h("b1", 1000.0, "b"),
            h("a2", 100.0, "a"),
            h("b2", 2000.0, "b"),
        ];
        assert_eq!(labels(&label_by_group_median(data).unwrap()), [0, 0, 1, 1]);
    }

    #[test]
    fn empty_label_input_errors() {
        assert!(label_by_group_median(vec![]).is_err());
    }

    fn examples(n: usize) -> Vec<LabeledExample> {
        (0..n)
            .map(|i| LabeledExample::new(h(&format!("id{i:03}"), i as f64, "g"), Label::Unpopular))
            .collect()
    }

    #[test]
    fn folds_even_and_remainder() {
        let plan = make_folds(&examples(10), 5, 7).unwrap();
        assert_eq!(plan.fold_sizes(), [2, 2, 2, 2, 2]);
        let mut sizes = make_folds(&examples(11), 5, 7).unwrap().fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, [2, 2, 2, 2, 3]);
    }

    #[test]
    fn folds_are_deterministic() {
        let data = examples(23);
        assert_eq!(make_folds(&data, 5, 42).unwrap(), make_folds(&data, 5, 42).unwrap());
        assert_ne!(make_folds(&data, 5, 42).unwrap(), make_folds(&data, 5, 43).unwrap());
    }

    #[test]
    fn fold_errors() {
        assert!(make_folds(&examples(3), 5, 0).is_err());
        assert!(make_folds(&examples(3), 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn at_most_half_popular_per_group(
            metrics in prop::collection::vec((0u32..20, 0usize..4), 1..60)
        ) {
            let data: Vec<Headline> = metrics
                .iter()
                .enumerate()
                .map(|(i, (m, g))| h(&format!("x{i}"), *m as f64, &format!("g{g}")))
                .collect();
            let labeled = label_by_group_median(data).unwrap();
            let mut per_group: HashMap<&str, (usize, usize)> = HashMap::new();
            for ex in &labeled {
                let e = per_group.entry(ex.headline.group.as_str()).or_default();
                e.0 += 1;
                e.1 += ex.label.as_u8() as usize;
            }
            for (size, popular) in per_group.values() {
                prop_assert!(*popular <= size / 2);
            }
        }

        #[test]
        fn labels_survive_permutation(
            metrics in prop::collection::vec((0u32..50, 0usize..3), 1..40),
            seed in any::<u64>(),
        ) {
            let data: Vec<Headline> = metrics
                .iter()
                .enumerate()
                .map(|(i, (m, g))| h(&format!("x{i}"), *m as f64, &format!("g{g}")))
                .collect();
            let base: HashMap<String, Label> = label_by_group_median(data.clone())
                .unwrap()
                .into_iter()
                .map(|e| (e.headline.id, e.label))
                .collect();
            let mut shuffled = data;
            fisher_yates(&mut shuffled, &mut ChaCha8Rng::seed_from_u64(seed));
            for e in label_by_group_median(shuffled).unwrap() {
                prop_assert_eq!(base[&e.headline.id], e.label);
            }
        }

        #[test]
        fn folds_partition(n in 2usize..80, k in 2usize..8, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let data = examples(n);
            let plan = make_folds(&data, k, seed).unwrap();
            prop_assert_eq!(plan.assignments.len(), n);
            let sizes = plan.fold_sizes();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
            for f in 0..k {
                let (train, test) = plan.split(&data, f);
                prop_assert_eq!(train.len() + test.len(), n);
                prop_assert_eq!(test.len(), sizes[f]);
            }
        }
    }
}
