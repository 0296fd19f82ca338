//! 2×2 contingency tests, the exact one-tailed binomial test, and the
//! population/medication tables built from sequence records.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::transcript::{Discontinuity, Medication, Population, SequenceRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("contingency table is empty")]
    EmptyTable,
    #[error("degenerate margins {rows:?}/{cols:?}: every row and column needs a positive total")]
    DegenerateMargin { rows: [u64; 2], cols: [u64; 2] },
    #[error("binomial test needs k <= n (got k={k}, n={n})")]
    SuccessesExceedTrials { k: u64, n: u64 },
    #[error("binomial test needs 0 < p0 < 1 (got {0})")]
    ProbabilityOutOfRange(f64),
    #[error("no {0} records")]
    MissingPopulation(Population),
}

/// Rows are groups, columns are outcome present / absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Result<Self, StatsError> {
        if a + b + c + d == 0 {
            return Err(StatsError::EmptyTable);
        }
        Ok(ContingencyTable2x2 { a, b, c, d })
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn row_totals(&self) -> [u64; 2] {
        [self.a + self.b, self.c + self.d]
    }

    pub fn col_totals(&self) -> [u64; 2] {
        [self.a + self.c, self.b + self.d]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Chi2,
    Chi2Yates,
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestKind,
    /// χ² statistic, or the success count for the binomial test.
    pub statistic: f64,
    pub p_value: f64,
    pub df: Option<u32>,
}

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi2_sf_df1(statistic: f64) -> f64 {
    if statistic <= 0.0 {
        1.0
    } else {
        erfc((statistic / 2.0).sqrt()).clamp(0.0, 1.0)
    }
}

/// Pearson χ² on a 2×2 table, optionally with Yates' continuity correction.
pub fn chi2_2x2(t: &ContingencyTable2x2, corrected: bool) -> Result<TestResult, StatsError> {
    let rows = t.row_totals();
    let cols = t.col_totals();
    if rows.contains(&0) || cols.contains(&0) {
        return Err(StatsError::DegenerateMargin { rows, cols });
    }
    let n = t.total() as f64;
    let cells = [
        (t.a, rows[0], cols[0]),
        (t.b, rows[0], cols[1]),
        (t.c, rows[1], cols[0]),
        (t.d, rows[1], cols[1]),
    ];
    let statistic = cells
        .iter()
        .map(|&(observed, r, c)| {
            let expected = r as f64 * c as f64 / n;
            let mut dev = (observed as f64 - expected).abs();
            if corrected {
                dev = (dev - 0.5).max(0.0);
            }
            dev * dev / expected
        })
        .sum::<f64>();
    Ok(TestResult {
        test: if corrected { TestKind::Chi2Yates } else { TestKind::Chi2 },
        statistic,
        p_value: chi2_sf_df1(statistic),
        df: Some(1),
    })
}

fn binomial_coefficient(n: u64, k: u64) -> BigInt {
    let k = k.min(n - k);
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

/// P(X >= k) for X ~ Binomial(n, p0), exact. `p0` is taken at its exact
/// binary value.
pub fn binomial_upper_tail_exact(k: u64, n: u64, p0: f64) -> Result<BigRational, StatsError> {
    if k > n {
        return Err(StatsError::SuccessesExceedTrials { k, n });
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatsError::ProbabilityOutOfRange(p0));
    }
    let p = BigRational::from_float(p0).expect("finite p0");
    let q = BigRational::one() - &p;
    let mut tail = BigRational::zero();
    for i in k..=n {
        let term = BigRational::from_integer(binomial_coefficient(n, i))
            * num::pow(p.clone(), i as usize)
            * num::pow(q.clone(), (n - i) as usize);
        tail += term;
    }
    Ok(tail)
}

/// One-tailed binomial test: probability of at least `k` successes in `n`
/// trials under success probability `p0`.
pub fn binomial_onetailed(k: u64, n: u64, p0: f64) -> Result<TestResult, StatsError> {
    let tail = binomial_upper_tail_exact(k, n, p0)?;
    Ok(TestResult {
        test: TestKind::Binomial,
        statistic: k as f64,
        p_value: tail.to_f64().unwrap_or(0.0).clamp(0.0, 1.0),
        df: None,
    })
}

/// Paper-style p-value: `<.001`, else three decimals without the leading 0.
/// Machine-readable p: fixed five decimals, scientific below 1e-4.
fn raw_p(p: f64) -> String {
    if p != 0.0 && p < 1e-4 {
        format!("{p:.3e}")
    } else {
        format!("{p:.5}")
    }
}

pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<.001".to_string()
    } else {
        let s = format!("{p:.3}");
        s.strip_prefix('0').unwrap_or(&s).to_string()
    }
}

fn percent(count: u64, total: u64) -> u64 {
    if total == 0 {
        0
    } else {
        (100.0 * count as f64 / total as f64).round() as u64
    }
}

fn cell(count: u64, total: u64) -> String {
    format!("{count} ({}%)", percent(count, total))
}

/// Outcome counts for one group of sequences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub none: u64,
    pub non_decisive: u64,
    pub decisive: u64,
}

impl GroupCounts {
    pub fn total(&self) -> u64 {
        self.none + self.non_decisive + self.decisive
    }

    pub fn discontinuous(&self) -> u64 {
        self.non_decisive + self.decisive
    }

    fn add(&mut self, d: Discontinuity) {
        match d {
            Discontinuity::None => self.none += 1,
            Discontinuity::NonDecisive => self.non_decisive += 1,
            Discontinuity::Decisive => self.decisive += 1,
        }
    }

    fn merged(self, other: GroupCounts) -> GroupCounts {
        GroupCounts {
            none: self.none + other.none,
            non_decisive: self.non_decisive + other.non_decisive,
            decisive: self.decisive + other.decisive,
        }
    }
}

/// Two groups compared on the discontinuity rows. The non-decisive test
/// leaves decisive sequences out of both margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label: String,
    pub discontinuity: TestResult,
    pub non_decisive: TestResult,
}

/// Decisive sequences of a focal population against another, p0 = 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisiveTest {
    pub label: String,
    pub successes: u64,
    pub trials: u64,
    pub result: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2 {
    pub groups: BTreeMap<Population, GroupCounts>,
    pub comparisons: Vec<Comparison>,
    pub decisive_tests: Vec<DecisiveTest>,
}

fn compare(label: &str, x: GroupCounts, y: GroupCounts) -> Result<Comparison, StatsError> {
    let disc = ContingencyTable2x2::new(x.discontinuous(), x.none, y.discontinuous(), y.none)?;
    let nd = ContingencyTable2x2::new(x.non_decisive, x.none, y.non_decisive, y.none)?;
    Ok(Comparison {
        label: label.to_string(),
        discontinuity: chi2_2x2(&disc, false)?,
        non_decisive: chi2_2x2(&nd, false)?,
    })
}

fn counts_by_population(records: &[SequenceRecord]) -> BTreeMap<Population, GroupCounts> {
    let mut groups: BTreeMap<Population, GroupCounts> = BTreeMap::new();
    for r in records {
        groups.entry(r.population).or_default().add(r.discontinuity);
    }
    groups
}

/// Discontinuities by population with the four χ² comparison columns and
/// the binomial tests on decisive sequences.
pub fn table2(records: &[SequenceRecord]) -> Result<Table2, StatsError> {
    let groups = counts_by_population(records);
    let get = |p| groups.get(&p).copied().ok_or(StatsError::MissingPopulation(p));
    let (p, d, hc) = (get(Population::SchP)?, get(Population::SchD)?, get(Population::Hc)?);
    let comparisons = vec![
        compare("SCH vs HC", p.merged(d), hc)?,
        compare("SCH-P vs HC", p, hc)?,
        compare("SCH-D vs HC", d, hc)?,
        compare("SCH-P vs SCH-D", p, d)?,
    ];
    let decisive_tests = [("SCH-P vs SCH-D", d), ("SCH-P vs HC", hc)]
        .into_iter()
        .filter(|(_, other)| p.decisive + other.decisive > 0)
        .map(|(label, other)| {
            let trials = p.decisive + other.decisive;
            binomial_onetailed(p.decisive, trials, 0.5).map(|result| DecisiveTest {
                label: label.to_string(),
                successes: p.decisive,
                trials,
                result,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(Table2 {
        groups,
        comparisons,
        decisive_tests,
    })
}

impl Table2 {
    pub fn render_text(&self) -> String {
        let pops = [Population::SchP, Population::SchD, Population::Hc];
        let g = |p: Population| self.groups.get(&p).copied().unwrap_or_default();
        let mut out = String::from("Table 2: discontinuities by population\n");
        let _ = write!(out, "{:<36}", "");
        for p in pops {
            let _ = write!(out, "{:<12}", p.as_str());
        }
        for c in &self.comparisons {
            let _ = write!(out, "{:>16}", c.label);
        }
        out.push('\n');

        let mut row = |label: &str, value: &dyn Fn(GroupCounts) -> String, ps: Option<&dyn Fn(&Comparison) -> f64>| {
            let _ = write!(out, "{label:<36}");
            for p in pops {
                let _ = write!(out, "{:<12}", value(g(p)));
            }
            if let Some(ps) = ps {
                for c in &self.comparisons {
                    let _ = write!(out, "{:>16}", format_p(ps(c)));
                }
            }
            out.push('\n');
        };
        row("sequences without discontinuity", &|c| cell(c.none, c.total()), Some(&|c| c.discontinuity.p_value));
        row("sequences with discontinuity", &|c| cell(c.discontinuous(), c.total()), None);
        row("- non-decisive", &|c| cell(c.non_decisive, c.total()), Some(&|c| c.non_decisive.p_value));
        row("- decisive", &|c| cell(c.decisive, c.total()), None);
        row("total", &|c| c.total().to_string(), None);

        for c in &self.comparisons {
            let _ = writeln!(
                out,
                "chi2 {}: discontinuity chi2={:.3} p={}; non-decisive chi2={:.3} p={}",
                c.label,
                c.discontinuity.statistic,
                raw_p(c.discontinuity.p_value),
                c.non_decisive.statistic,
                raw_p(c.non_decisive.p_value)
            );
        }
        for t in &self.decisive_tests {
            let _ = writeln!(
                out,
                "binomial decisive {}: k={} n={} p0=0.5 p={:.5}",
                t.label, t.successes, t.trials, t.result.p_value
            );
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("table,group,none,non_decisive,decisive,total\n");
        for (p, c) in &self.groups {
            let _ = writeln!(out, "2,{p},{},{},{},{}", c.none, c.non_decisive, c.decisive, c.total());
        }
        out.push_str("table,comparison,test,statistic,p_value\n");
        for c in &self.comparisons {
            let _ = writeln!(out, "2,{},chi2-discontinuity,{:.6},{:.6}", c.label, c.discontinuity.statistic, c.discontinuity.p_value);
            let _ = writeln!(out, "2,{},chi2-non-decisive,{:.6},{:.6}", c.label, c.non_decisive.statistic, c.non_decisive.p_value);
        }
        for t in &self.decisive_tests {
            let _ = writeln!(out, "2,{},binomial-decisive,{},{:.6}", t.label, t.successes, t.result.p_value);
        }
        out
    }
}

/// SCH-P against SCH-D within one medication stratum, non-decisive
/// sequences against sequences without discontinuity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub medication: Medication,
    pub paranoid: GroupCounts,
    pub disorganized: GroupCounts,
    pub test: TestResult,
}

impl Stratum {
    pub fn label(&self) -> &'static str {
        match self.medication {
            Medication::Antipsychotic => "SCH-A",
            Medication::Untreated => "SCH-S",
            Medication::None => "SCH-none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3 {
    pub strata: Vec<Stratum>,
    pub warnings: Vec<String>,
}

/// Non-decisive discontinuities by clinical form and medication. Decisive
/// sequences are left out; strata without rows for both forms are omitted
/// with a warning.
pub fn table3(records: &[SequenceRecord]) -> Result<Table3, StatsError> {
    let mut strata = Vec::new();
    let mut warnings = Vec::new();
    for medication in [Medication::Untreated, Medication::Antipsychotic] {
        let mut paranoid = GroupCounts::default();
        let mut disorganized = GroupCounts::default();
        for r in records.iter().filter(|r| r.medication == medication) {
            match r.population {
                Population::SchP => paranoid.add(r.discontinuity),
                Population::SchD => disorganized.add(r.discontinuity),
                Population::Hc => {}
            }
        }
        let label = if medication == Medication::Untreated { "SCH-S" } else { "SCH-A" };
        let kept = |c: GroupCounts| c.non_decisive + c.none;
        if kept(paranoid) == 0 || kept(disorganized) == 0 {
            warnings.push(format!("stratum {label} omitted: no rows for one of SCH-P / SCH-D"));
            continue;
        }
        let t = ContingencyTable2x2::new(
            paranoid.non_decisive,
            paranoid.none,
            disorganized.non_decisive,
            disorganized.none,
        )?;
        match chi2_2x2(&t, false) {
            Ok(test) => strata.push(Stratum {
                medication,
                paranoid,
                disorganized,
                test,
            }),
            Err(e) => warnings.push(format!("stratum {label} omitted: {e}")),
        }
    }
    Ok(Table3 { strata, warnings })
}

impl Table3 {
    pub fn render_text(&self) -> String {
        let mut out = String::from("Table 3: non-decisive discontinuities by clinical form and medication\n");
        for s in &self.strata {
            let (p, d) = (s.paranoid, s.disorganized);
            let (pt, dt) = (p.non_decisive + p.none, d.non_decisive + d.none);
            let _ = writeln!(out, "{:<8}{:<36}{:<12}{:<12}", s.label(), "", "SCH-P", "SCH-D");
            let _ = writeln!(out, "{:<8}{:<36}{:<12}{:<12}", "", "non-decisive", cell(p.non_decisive, pt), cell(d.non_decisive, dt));
            let _ = writeln!(out, "{:<8}{:<36}{:<12}{:<12}", "", "without discontinuity", cell(p.none, pt), cell(d.none, dt));
            let _ = writeln!(out, "{:<8}{:<36}{:<12}{:<12}", "", "total", pt, dt);
            let _ = writeln!(
                out,
                "chi2 {} SCH-P vs SCH-D: chi2={:.3} p={} ({})",
                s.label(),
                s.test.statistic,
                raw_p(s.test.p_value),
                format_p(s.test.p_value)
            );
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("table,stratum,group,non_decisive,none\n");
        for s in &self.strata {
            let _ = writeln!(out, "3,{},SCH-P,{},{}", s.label(), s.paranoid.non_decisive, s.paranoid.none);
            let _ = writeln!(out, "3,{},SCH-D,{},{}", s.label(), s.disorganized.non_decisive, s.disorganized.none);
            let _ = writeln!(out, "3,{},chi2,{:.6},{:.6}", s.label(), s.test.statistic, s.test.p_value);
        }
        out
    }
}
