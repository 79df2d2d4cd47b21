//! Loading benchmark problems: HumanEval-, MBPP- and CodeContests-style
//! line-delimited JSON (optionally gzip-compressed).

use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use cfprobe_syntax::ast::{ExprKind, StmtKind};
use cfprobe_syntax::{is_docstring, SourceProgram, SyntaxTree};
use flate2::read::GzDecoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tracing::warn;

use crate::cf_gen::{IoCase, Problem, TestKind, TestSuite};
use crate::harness::sandbox::Sandbox;

pub const DEFAULT_TIME_LIMIT_S: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    Humaneval,
    Mbpp,
    Codecontests,
}

impl DatasetFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetFormat::Humaneval => "humaneval",
            DatasetFormat::Mbpp => "mbpp",
            DatasetFormat::Codecontests => "codecontests",
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetFormat {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "humaneval" => Ok(DatasetFormat::Humaneval),
            "mbpp" => Ok(DatasetFormat::Mbpp),
            "codecontests" | "code-contests" => Ok(DatasetFormat::Codecontests),
            other => Err(DatasetError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown dataset format `{0}`")]
    UnknownFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("record {index}: {message}")]
    Format { index: usize, message: String },
}

/// A record that was read but not turned into a usable problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub problems: Vec<Problem>,
    pub rejected: Vec<Rejection>,
}

/// Read raw JSON records, one per line; `.gz` files are decompressed.
pub fn read_records(path: &Path) -> Result<Vec<Value>, DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| DatasetError::Format {
            index: out.len(),
            message: format!("line {}: {e}", i + 1),
        })?;
        out.push(v);
    }
    Ok(out)
}

fn field<'a>(v: &'a Value, index: usize, name: &str) -> Result<&'a Value, DatasetError> {
    v.get(name).ok_or_else(|| DatasetError::Format {
        index,
        message: format!("missing field `{name}`"),
    })
}

fn str_field(v: &Value, index: usize, name: &str) -> Result<String, DatasetError> {
    match field(v, index, name)? {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(DatasetError::Format {
            index,
            message: format!("field `{name}` is not a string"),
        }),
    }
}

fn str_list(v: &Value, index: usize, name: &str) -> Result<Vec<String>, DatasetError> {
    let bad = || DatasetError::Format {
        index,
        message: format!("field `{name}` is not a list of strings"),
    };
    field(v, index, name)?
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|x| x.as_str().map(str::to_string).ok_or_else(bad))
        .collect()
}

/// Unix line endings and a final newline; with `expand_tabs`, leading
/// tabs become four spaces (some sources mix tabs and spaces).
fn normalize(text: &str, expand_tabs: bool) -> String {
    let mut t = String::with_capacity(text.len() + 1);
    for line in text.replace("\r\n", "\n").split_inclusive('\n') {
        let body = line.trim_start_matches('\t');
        let tabs = line.len() - body.len();
        if expand_tabs && tabs > 0 {
            t.push_str(&"    ".repeat(tabs));
            t.push_str(body);
        } else {
            t.push_str(line);
        }
    }
    if !t.ends_with('\n') {
        t.push('\n');
    }
    t
}

/// `text` as a module docstring.
fn docstring(text: &str) -> String {
    let body = text.trim().replace('\\', "\\\\").replace("\"\"\"", "\\\"\\\"\\\"");
    format!("\"\"\"{body}\n\"\"\"\n")
}

/// Literal text of a function's docstring, quotes stripped.
fn function_docstring(tree: &SyntaxTree, name: &str) -> Option<String> {
    let f = tree.function(&tree.find_function(name)?)?;
    let first = f.body.stmts.first().filter(|s| is_docstring(s))?;
    let StmtKind::Expr(e) = &first.kind else { return None };
    if !matches!(e.kind, ExprKind::Str { .. }) {
        return None;
    }
    let raw = tree.text(e.span);
    let raw = raw.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    let q = if raw.starts_with("\"\"\"") || raw.starts_with("'''") { 3 } else { 1 };
    Some(raw.get(q..raw.len().saturating_sub(q))?.trim().to_string())
}

/// Map one record to a problem without running anything. Solutions that
/// the parser cannot handle are rejections, not format errors.
pub fn problem_from_record(format: DatasetFormat, v: &Value, index: usize) -> Result<Result<Vec<Problem>, Rejection>, DatasetError> {
    match format {
        DatasetFormat::Humaneval => humaneval(v, index),
        DatasetFormat::Mbpp => mbpp(v, index),
        DatasetFormat::Codecontests => codecontests(v, index),
    }
}

fn reject(index: usize, id: &str, reason: impl Into<String>) -> Rejection {
    Rejection {
        index,
        id: id.to_string(),
        reason: reason.into(),
    }
}

fn humaneval(v: &Value, index: usize) -> Result<Result<Vec<Problem>, Rejection>, DatasetError> {
    let id = str_field(v, index, "task_id")?;
    let prompt = str_field(v, index, "prompt")?;
    let solution = str_field(v, index, "canonical_solution")?;
    let test = str_field(v, index, "test")?;
    let entry = str_field(v, index, "entry_point")?;
    let text = normalize(&format!("{prompt}{solution}"), false);
    let tree = match cfprobe_syntax::parse(&text) {
        Ok(t) => t,
        Err(e) => return Ok(Err(reject(index, &id, format!("parse: {e}")))),
    };
    let Some(fref) = tree.find_function(&entry) else {
        return Ok(Err(reject(index, &id, format!("entry point `{entry}` not defined"))));
    };
    let preamble = text[..fref.span.byte_start].to_string();
    Ok(Ok(vec![Problem {
        instruction: function_docstring(&tree, &entry).unwrap_or_default(),
        preamble,
        reference_solution: SourceProgram::new(text, id.clone()),
        entry_point: Some(entry.clone()),
        test_suite: TestSuite {
            kind: TestKind::Assert {
                setup: test,
                cases: vec![format!("check({entry})")],
            },
            time_limit_s: DEFAULT_TIME_LIMIT_S,
        },
        id,
        dataset: "humaneval".into(),
    }]))
}

fn mbpp(v: &Value, index: usize) -> Result<Result<Vec<Problem>, Rejection>, DatasetError> {
    let id = format!("Mbpp/{}", str_field(v, index, "task_id")?);
    let instruction = str_field(v, index, "text").or_else(|_| str_field(v, index, "prompt"))?;
    let code = str_field(v, index, "code")?;
    let tests = str_list(v, index, "test_list")?;
    let setup = v.get("test_setup_code").and_then(Value::as_str).unwrap_or("").to_string();
    let text = format!("{}{}", docstring(&instruction), normalize(&code, true));
    let tree = match cfprobe_syntax::parse(&text) {
        Ok(t) => t,
        Err(e) => return Ok(Err(reject(index, &id, format!("parse: {e}")))),
    };
    // The function the tests call is the one under test.
    let first_test = tests.first().map(String::as_str).unwrap_or("");
    let called = crate::mutations::names::words(first_test);
    let entry = tree
        .functions()
        .iter()
        .filter_map(|f| tree.function(f))
        .map(|f| f.name.name.clone())
        .find(|n| called.contains(n));
    Ok(Ok(vec![Problem {
        id: id.clone(),
        dataset: "mbpp".into(),
        instruction,
        preamble: String::new(),
        reference_solution: SourceProgram::new(text, id),
        entry_point: entry,
        test_suite: TestSuite {
            kind: TestKind::Assert { setup, cases: tests },
            time_limit_s: DEFAULT_TIME_LIMIT_S,
        },
    }]))
}

/// Python 3 in the CodeContests language enumeration.
const PYTHON3: i64 = 3;

fn io_cases(v: &Value, name: &str) -> Vec<IoCase> {
    let Some(t) = v.get(name) else { return Vec::new() };
    let list = |k: &str| -> Vec<String> {
        t.get(k)
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(|x| x.as_str().map(str::to_string)).collect())
            .unwrap_or_default()
    };
    list("input").into_iter().zip(list("output")).map(|(input, output)| IoCase { input, output }).collect()
}

/// Every Python 3 solution of a record is returned as a candidate problem;
/// [`ingest`] keeps the first one that passes.
fn codecontests(v: &Value, index: usize) -> Result<Result<Vec<Problem>, Rejection>, DatasetError> {
    let id = str_field(v, index, "name")?;
    let description = str_field(v, index, "description")?;
    let sols = field(v, index, "solutions")?;
    let langs: Vec<i64> = sols.get("language").and_then(Value::as_array).map(|a| a.iter().filter_map(Value::as_i64).collect()).unwrap_or_default();
    let codes = str_list(sols, index, "solution")?;
    let mut cases = io_cases(v, "public_tests");
    cases.extend(io_cases(v, "private_tests"));
    if cases.is_empty() {
        cases = io_cases(v, "generated_tests");
    }
    if cases.is_empty() {
        return Ok(Err(reject(index, &id, "no test cases")));
    }
    let time_limit_s = v
        .get("time_limit")
        .and_then(|t| t.get("seconds"))
        .and_then(Value::as_f64)
        .map_or(DEFAULT_TIME_LIMIT_S, |s| (s * 4.0).clamp(2.0, DEFAULT_TIME_LIMIT_S));
    let doc = docstring(&description);
    let candidates: Vec<Problem> = codes
        .iter()
        .zip(langs.iter().chain(std::iter::repeat(&PYTHON3)))
        .filter(|(_, &l)| l == PYTHON3)
        .map(|(code, _)| format!("{doc}{}", normalize(code, true)))
        .filter(|text| cfprobe_syntax::parse(text).is_ok())
        .map(|text| Problem {
            id: id.clone(),
            dataset: "codecontests".into(),
            instruction: description.clone(),
            preamble: String::new(),
            reference_solution: SourceProgram::new(text, id.clone()),
            entry_point: None,
            test_suite: TestSuite {
                kind: TestKind::Io { cases: cases.clone() },
                time_limit_s,
            },
        })
        .collect();
    if candidates.is_empty() {
        return Ok(Err(reject(index, &id, "no parseable Python 3 solution")));
    }
    Ok(Ok(candidates))
}

/// Load a dataset file. With a sandbox, every reference solution must pass
/// its own tests (for multi-solution records, the first passing one is
/// kept); failures are rejections. `limit` caps the number of accepted
/// problems, taken in file order.
pub fn ingest(path: &Path, format: DatasetFormat, sandbox: Option<&Sandbox>, limit: Option<usize>) -> Result<Ingested, DatasetError> {
    let records = read_records(path)?;
    let mut parsed = Vec::new();
    let mut out = Ingested::default();
    for (i, v) in records.iter().enumerate() {
        match problem_from_record(format, v, i)? {
            Ok(c) => parsed.push((i, c)),
            Err(r) => out.rejected.push(r),
        }
    }
    let take = limit.unwrap_or(usize::MAX);
    // Validate in chunks so `--limit` does not pay for the whole file.
    let chunk = rayon::current_num_threads().max(1) * 4;
    for group in parsed.chunks(chunk) {
        if out.problems.len() >= take {
            break;
        }
        let checked: Vec<Result<Problem, Rejection>> = group
            .par_iter()
            .map(|(i, cands)| {
                let Some(sb) = sandbox else { return Ok(cands[0].clone()) };
                let mut last = String::new();
                for c in cands {
                    let r = sb.run_tests(&c.reference_solution.text, &c.test_suite);
                    if r.passed() {
                        return Ok(c.clone());
                    }
                    last = format!("{}: {}", r.status.as_str(), r.per_case.iter().map(|c| c.detail.as_str()).find(|d| !d.is_empty()).unwrap_or(""));
                }
                Err(reject(*i, &cands[0].id, format!("reference fails its tests ({last})")))
            })
            .collect();
        for c in checked {
            match c {
                Ok(p) if out.problems.len() < take => out.problems.push(p),
                Ok(_) => {}
                Err(r) => {
                    warn!(id = %r.id, reason = %r.reason, "rejected");
                    out.rejected.push(r);
                }
            }
        }
    }
    out.rejected.sort_by_key(|r| r.index);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn humaneval_mapping() {
        let v = json!({
            "task_id": "HumanEval/0",
            "prompt": "def add(a, b):\n    \"\"\" Add two numbers.\n    \"\"\"\n",
            "canonical_solution": "    return a + b\n",
            "test": "def check(candidate):\n    assert candidate(1, 2) == 3\n",
            "entry_point": "add",
        });
        let p = problem_from_record(DatasetFormat::Humaneval, &v, 0).unwrap().unwrap().remove(0);
        assert_eq!(p.instruction, "Add two numbers.");
        assert_eq!(p.entry_point.as_deref(), Some("add"));
        assert!(p.reference_solution.text.ends_with("    return a + b\n"));
        let err = problem_from_record(DatasetFormat::Humaneval, &json!({"task_id": "x"}), 7).unwrap_err();
        assert!(matches!(err, DatasetError::Format { index: 7, .. }));
    }

    #[test]
    fn mbpp_mapping() {
        let v = json!({
            "task_id": 2,
            "text": "Write a function \"\"\"to\"\"\" add.",
            "code": "def helper(x):\r\n\treturn x\r\ndef add(a, b):\r\n\treturn helper(a) + b",
            "test_list": ["assert add(1, 2) == 3", "assert add(0, 0) == 0"],
            "test_setup_code": "",
        });
        let p = problem_from_record(DatasetFormat::Mbpp, &v, 0).unwrap().unwrap().remove(0);
        assert_eq!(p.id, "Mbpp/2");
        assert_eq!(p.entry_point.as_deref(), Some("add"));
        assert_eq!(p.test_suite.len(), 2);
        assert!(cfprobe_syntax::parse(&p.reference_solution.text).is_ok());
        assert!(p.reference_solution.text.contains("\n    return helper(a) + b\n"));
    }

    #[test]
    fn codecontests_mapping() {
        let v = json!({
            "name": "1_A",
            "description": "Print the sum.",
            "solutions": {"language": [2, 3, 3], "solution": ["int main(){}", "print(1 +", "a, b = map(int, input().split())\nprint(a + b)\n"]},
            "public_tests": {"input": ["1 2\n"], "output": ["3\n"]},
            "private_tests": {"input": [], "output": []},
        });
        let c = problem_from_record(DatasetFormat::Codecontests, &v, 0).unwrap().unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].reference_solution.text.starts_with("\"\"\"Print the sum.\n\"\"\"\n"));
        assert_eq!(c[0].test_suite.len(), 1);
    }

    #[test]
    fn formats_parse() {
        assert_eq!("HumanEval".parse::<DatasetFormat>().unwrap(), DatasetFormat::Humaneval);
        assert!("apps".parse::<DatasetFormat>().is_err());
    }
}
