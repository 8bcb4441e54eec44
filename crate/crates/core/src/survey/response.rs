use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The paired before/after question sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Awareness,
    SelfEfficacy,
    CommunitySense,
}

impl Variable {
    pub const ALL: [Variable; 3] = [
        Variable::Awareness,
        Variable::SelfEfficacy,
        Variable::CommunitySense,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variable::Awareness => "awareness",
            Variable::SelfEfficacy => "self_efficacy",
            Variable::CommunitySense => "community_sense",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Two Likert answers (1..=5) before and two after. `None` is unanswered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertSet {
    pub before: [Option<u8>; 2],
    pub after: [Option<u8>; 2],
}

impl LikertSet {
    pub fn new(before: [u8; 2], after: [u8; 2]) -> Self {
        LikertSet {
            before: before.map(Some),
            after: after.map(Some),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub respondent_id: String,
    pub explore: [bool; 5],
    pub document: [bool; 3],
    pub share: [bool; 4],
    /// Website browsing frequency, 1..=5.
    pub browsing: u8,
    pub people_discussed: u32,
    /// Meetings attended, 0..=12.
    pub meetings: u8,
    pub age_band: String,
    pub education_band: String,
    pub awareness: LikertSet,
    pub self_efficacy: LikertSet,
    pub community_sense: LikertSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    /// A required answer is missing.
    Incomplete,
    /// An answer is malformed or out of range.
    Invalid,
}

/// Why a response was left out of the study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedResponse {
    pub respondent_id: String,
    pub kind: Rejection,
    pub reason: String,
}

impl SurveyResponse {
    pub fn likert(&self, v: Variable) -> &LikertSet {
        match v {
            Variable::Awareness => &self.awareness,
            Variable::SelfEfficacy => &self.self_efficacy,
            Variable::CommunitySense => &self.community_sense,
        }
    }

    pub fn likert_mut(&mut self, v: Variable) -> &mut LikertSet {
        match v {
            Variable::Awareness => &mut self.awareness,
            Variable::SelfEfficacy => &mut self.self_efficacy,
            Variable::CommunitySense => &mut self.community_sense,
        }
    }

    /// Range and completeness check.
    pub fn check(&self) -> std::result::Result<(), RejectedResponse> {
        let reject = |kind, reason: String| RejectedResponse {
            respondent_id: self.respondent_id.clone(),
            kind,
            reason,
        };
        if !(1..=5).contains(&self.browsing) {
            return Err(reject(Rejection::Invalid, format!("browsing {} not in 1..=5", self.browsing)));
        }
        if self.meetings > 12 {
            return Err(reject(Rejection::Invalid, format!("meetings {} not in 0..=12", self.meetings)));
        }
        let mut missing = None;
        for v in Variable::ALL {
            let set = self.likert(v);
            for (half, items) in [("before", &set.before), ("after", &set.after)] {
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Some(x) if !(1..=5).contains(x) => {
                            return Err(reject(
                                Rejection::Invalid,
                                format!("{v}_{half}_{} = {x} not in 1..=5", i + 1),
                            ));
                        }
                        None if missing.is_none() => missing = Some(format!("{v}_{half}_{}", i + 1)),
                        _ => {}
                    }
                }
            }
        }
        match missing {
            Some(col) => Err(reject(Rejection::Incomplete, format!("{col} unanswered"))),
            None => Ok(()),
        }
    }
}

/// Number of choices ticked in the explore, document and share questions.
pub fn participation_levels(r: &SurveyResponse) -> (u32, u32, u32) {
    let count = |xs: &[bool]| xs.iter().filter(|x| **x).count() as u32;
    (count(&r.explore), count(&r.document), count(&r.share))
}

/// Mean of the before pair, mean of the after pair, and after − before.
pub fn variable_scores(r: &SurveyResponse, v: Variable) -> Result<(f64, f64, f64)> {
    let set = r.likert(v);
    let mean = |pair: &[Option<u8>; 2], half: &str| match pair {
        [Some(a), Some(b)] => Ok((f64::from(*a) + f64::from(*b)) / 2.0),
        _ => Err(Error::invalid(
            "response",
            format!("{}: {v} {half} pair is incomplete", r.respondent_id),
        )),
    };
    let before = mean(&set.before, "before")?;
    let after = mean(&set.after, "after")?;
    Ok((before, after, after - before))
}

/// Column names of the survey CSV, in order.
pub fn csv_columns() -> Vec<String> {
    let mut cols = vec!["respondent_id".to_owned()];
    cols.extend((1..=5).map(|i| format!("explore_{i}")));
    cols.extend((1..=3).map(|i| format!("document_{i}")));
    cols.extend((1..=4).map(|i| format!("share_{i}")));
    cols.extend(
        ["browsing", "people_discussed", "meetings", "age_band", "education_band"].map(String::from),
    );
    for v in Variable::ALL {
        for half in ["before", "after"] {
            for i in 1..=2 {
                cols.push(format!("{v}_{half}_{i}"));
            }
        }
    }
    cols
}

/// One CSV row: a response, or the reason it cannot be used.
pub type SurveyRow = std::result::Result<SurveyResponse, RejectedResponse>;

/// Read the survey CSV. Columns are matched by header name, so their order
/// is free and extra columns are ignored. Blank cells are unanswered.
pub fn read_survey_csv<R: Read>(input: R) -> Result<Vec<SurveyRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::invalid("survey csv", e.to_string()))?
        .clone();
    let mut index = Vec::new();
    for col in csv_columns() {
        let i = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::invalid("survey csv", format!("missing column {col}")))?;
        index.push(i);
    }
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::invalid("survey csv", format!("row {}: {e}", n + 1)))?;
        let cells: Vec<&str> = index.iter().map(|&i| record.get(i).unwrap_or("")).collect();
        rows.push(parse_row(&cells, n + 1));
    }
    Ok(rows)
}

fn parse_row(cells: &[&str], row: usize) -> SurveyRow {
    let id = if cells[0].is_empty() { format!("row{row}") } else { cells[0].to_owned() };
    let cols = csv_columns();
    let reject = |kind, col: &str, what: &str| RejectedResponse {
        respondent_id: id.clone(),
        kind,
        reason: format!("{col} {what}"),
    };
    let required = |k: usize| -> std::result::Result<&str, RejectedResponse> {
        if cells[k].is_empty() {
            Err(reject(Rejection::Incomplete, &cols[k], "unanswered"))
        } else {
            Ok(cells[k])
        }
    };
    let int = |k: usize, lo: i64, hi: i64| -> std::result::Result<i64, RejectedResponse> {
        let s = required(k)?;
        match s.parse::<i64>() {
            Ok(x) if (lo..=hi).contains(&x) => Ok(x),
            _ => Err(reject(Rejection::Invalid, &cols[k], &format!("{s:?} not in {lo}..={hi}"))),
        }
    };
    let flag = |k: usize| int(k, 0, 1).map(|x| x == 1);
    let likert = |k: usize| -> std::result::Result<Option<u8>, RejectedResponse> {
        if cells[k].is_empty() {
            Ok(None)
        } else {
            int(k, 1, 5).map(|x| Some(x as u8))
        }
    };

    let mut explore = [false; 5];
    for (i, e) in explore.iter_mut().enumerate() {
        *e = flag(1 + i)?;
    }
    let mut document = [false; 3];
    for (i, d) in document.iter_mut().enumerate() {
        *d = flag(6 + i)?;
    }
    let mut share = [false; 4];
    for (i, s) in share.iter_mut().enumerate() {
        *s = flag(9 + i)?;
    }
    let browsing = int(13, 1, 5)? as u8;
    let people_discussed = int(14, 0, i64::from(u32::MAX))? as u32;
    let meetings = int(15, 0, 12)? as u8;
    let mut sets = [LikertSet::default(); 3];
    for (vi, set) in sets.iter_mut().enumerate() {
        let base = 18 + vi * 4;
        set.before = [likert(base)?, likert(base + 1)?];
        set.after = [likert(base + 2)?, likert(base + 3)?];
    }
    let response = SurveyResponse {
        respondent_id: id.clone(),
        explore,
        document,
        share,
        browsing,
        people_discussed,
        meetings,
        age_band: cells[16].to_owned(),
        education_band: cells[17].to_owned(),
        awareness: sets[0],
        self_efficacy: sets[1],
        community_sense: sets[2],
    };
    response.check()?;
    Ok(response)
}

/// Render responses in the CSV layout read by [`read_survey_csv`].
pub fn write_survey_csv(responses: &[SurveyResponse]) -> String {
    let mut out = csv_columns().join(",");
    out.push('\n');
    let b = |x: bool| if x { "1" } else { "0" }.to_owned();
    let l = |x: Option<u8>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in responses {
        let mut cells = vec![r.respondent_id.clone()];
        cells.extend(r.explore.iter().map(|x| b(*x)));
        cells.extend(r.document.iter().map(|x| b(*x)));
        cells.extend(r.share.iter().map(|x| b(*x)));
        cells.push(r.browsing.to_string());
        cells.push(r.people_discussed.to_string());
        cells.push(r.meetings.to_string());
        cells.push(r.age_band.clone());
        cells.push(r.education_band.clone());
        for v in Variable::ALL {
            let set = r.likert(v);
            cells.extend(set.before.iter().chain(&set.after).map(|x| l(*x)));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
pub(crate) fn sample(id: &str) -> SurveyResponse {
    SurveyResponse {
        respondent_id: id.into(),
        explore: [true, false, true, true, false],
        document: [false; 3],
        share: [false; 4],
        browsing: 3,
        people_discussed: 2,
        meetings: 1,
        age_band: "25-34".into(),
        education_band: "bachelor".into(),
        awareness: LikertSet::new([3, 4], [4, 5]),
        self_efficacy: LikertSet::new([2, 2], [2, 2]),
        community_sense: LikertSet::new([5, 5], [1, 1]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn participation() {
        let mut r = sample("a");
        assert_eq!(participation_levels(&r), (3, 0, 0));
        r.explore = [true; 5];
        r.document = [true; 3];
        r.share = [true; 4];
        assert_eq!(participation_levels(&r), (5, 3, 4));
    }

    #[test]
    fn scores() {
        let r = sample("a");
        assert_eq!(variable_scores(&r, Variable::Awareness).unwrap(), (3.5, 4.5, 1.0));
        assert_eq!(variable_scores(&r, Variable::SelfEfficacy).unwrap().2, 0.0);
        assert_eq!(variable_scores(&r, Variable::CommunitySense).unwrap().2, -4.0);
        let mut r = r;
        r.awareness.after[1] = None;
        assert!(variable_scores(&r, Variable::Awareness).is_err());
        assert_eq!(r.check().unwrap_err().kind, Rejection::Incomplete);
    }

    #[test]
    fn ranges() {
        let mut r = sample("a");
        r.meetings = 13;
        assert_eq!(r.check().unwrap_err().kind, Rejection::Invalid);
        let mut r = sample("a");
        r.self_efficacy.before[0] = Some(6);
        assert_eq!(r.check().unwrap_err().kind, Rejection::Invalid);
    }

    #[test]
    fn csv_round_trip() {
        let rs = vec![sample("a"), sample("b")];
        let text = write_survey_csv(&rs);
        let rows = read_survey_csv(text.as_bytes()).unwrap();
        assert_eq!(rows, rs.into_iter().map(Ok).collect::<Vec<_>>());
    }

    #[test]
    fn csv_rejections() {
        let mut text = write_survey_csv(&[sample("a")]);
        let good = text.lines().nth(1).unwrap().to_owned();
        // meetings column -> 99, then a blank Likert cell.
        let mut cells: Vec<&str> = good.split(',').collect();
        cells[15] = "99";
        text.push_str(&cells.join(","));
        text.push('\n');
        let mut cells: Vec<&str> = good.split(',').collect();
        cells[25] = "";
        text.push_str(&cells.join(","));
        text.push('\n');
        let rows = read_survey_csv(text.as_bytes()).unwrap();
        assert!(rows[0].is_ok());
        assert_eq!(rows[1].as_ref().unwrap_err().kind, Rejection::Invalid);
        let inc = rows[2].as_ref().unwrap_err();
        assert_eq!(inc.kind, Rejection::Incomplete);
        assert!(inc.reason.contains("self_efficacy_after_2"), "{}", inc.reason);
    }

    #[test]
    fn missing_column() {
        assert!(read_survey_csv("respondent_id,explore_1\n".as_bytes()).is_err());
    }
}
