//! Subprocess adapters for external models.
//!
//! One request per invocation: a single JSON object on the child's stdin, a
//! single JSON object back on its stdout. Diagnostics belong on stderr.
//!
//! | role              | request fields                    | response                                   |
//! |-------------------|-----------------------------------|--------------------------------------------|
//! | `ocr`             | `image_path`                      | `{"regions":[{"bbox","text","confidence"}]}` |
//! | `text_classifier` | `text`, `data_types`              | `{"data_type": name \| null}`              |
//! | `icon_classifier` | `image_path`, `classes`           | `{"class": name \| null, "score": n}`      |
//!
//! Every request also carries `"role"` and `"version": 1`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::model::DataType;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterRole {
    Ocr,
    TextClassifier,
    IconClassifier,
}

impl AdapterRole {
    pub fn as_str(self) -> &'static str {
        match self {
            AdapterRole::Ocr => "ocr",
            AdapterRole::TextClassifier => "text_classifier",
            AdapterRole::IconClassifier => "icon_classifier",
        }
    }
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter command line is empty")]
    EmptySpec,
    #[error("adapter command line {0:?} does not parse")]
    BadSpec(String),
    #[error("{role} adapter {program}: expected role {expected}")]
    WrongRole {
        program: String,
        role: &'static str,
        expected: &'static str,
    },
    #[error("cannot launch adapter {program}: {source}")]
    Launch {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("adapter {program} exited with {code:?}; stdout: {stdout:?}; stderr: {stderr:?}")]
    Failed {
        program: String,
        code: Option<i32>,
        stdout: String,
        stderr: String,
    },
    #[error("adapter {program} wrote malformed JSON ({msg}): {payload:?}")]
    Malformed {
        program: String,
        msg: String,
        payload: String,
    },
    #[error("adapter {program} response violates the schema ({msg}): {payload}")]
    Schema {
        program: String,
        msg: String,
        payload: String,
    },
}

/// An external executable plus static arguments, serving one role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdapterSpec {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub role: AdapterRole,
}

impl AdapterSpec {
    /// Parse a shell-style command line such as `python3 ocr.py --lang en`.
    pub fn parse(command: &str, role: AdapterRole) -> Result<Self, AdapterError> {
        let parts = shlex::split(command).ok_or_else(|| AdapterError::BadSpec(command.to_string()))?;
        let (program, args) = parts.split_first().ok_or(AdapterError::EmptySpec)?;
        Ok(AdapterSpec {
            program: PathBuf::from(program),
            args: args.to_vec(),
            role,
        })
    }

    /// Identifier recorded in bundle metadata.
    pub fn describe(&self) -> String {
        let mut s = format!("{}:{}", self.role.as_str(), self.program.display());
        for a in &self.args {
            s.push(' ');
            s.push_str(a);
        }
        s
    }

    fn name(&self) -> String {
        self.program.display().to_string()
    }

    fn expect_role(&self, role: AdapterRole) -> Result<(), AdapterError> {
        if self.role == role {
            Ok(())
        } else {
            Err(AdapterError::WrongRole {
                program: self.name(),
                role: self.role.as_str(),
                expected: role.as_str(),
            })
        }
    }

    /// Run one request/response exchange.
    pub fn invoke(&self, request: &Value) -> Result<Value, AdapterError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| AdapterError::Launch {
                program: self.name(),
                source,
            })?;
        let body = serde_json::to_vec(request).expect("request serializes");
        if let Some(mut stdin) = child.stdin.take() {
            // a child that never reads its input closes the pipe early
            if let Err(e) = stdin.write_all(&body) {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(AdapterError::Launch {
                        program: self.name(),
                        source: e,
                    });
                }
            }
        }
        let out = child.wait_with_output().map_err(|source| AdapterError::Launch {
            program: self.name(),
            source,
        })?;
        let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
        let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
        if !stderr.trim().is_empty() {
            log::debug!("adapter {} stderr: {}", self.name(), stderr.trim());
        }
        if !out.status.success() {
            return Err(AdapterError::Failed {
                program: self.name(),
                code: out.status.code(),
                stdout,
                stderr,
            });
        }
        serde_json::from_str(&stdout).map_err(|e| AdapterError::Malformed {
            program: self.name(),
            msg: e.to_string(),
            payload: stdout,
        })
    }

    fn schema_err(&self, msg: impl Into<String>, payload: &Value) -> AdapterError {
        AdapterError::Schema {
            program: self.name(),
            msg: msg.into(),
            payload: payload.to_string(),
        }
    }

    pub fn ocr(&self, image_path: &Path) -> Result<Vec<OcrRegion>, AdapterError> {
        self.expect_role(AdapterRole::Ocr)?;
        let resp = self.invoke(&json!({
            "role": "ocr",
            "version": PROTOCOL_VERSION,
            "image_path": image_path.display().to_string(),
        }))?;
        let parsed: OcrResponse =
            serde_json::from_value(resp.clone()).map_err(|e| self.schema_err(e.to_string(), &resp))?;
        for r in &parsed.regions {
            if r.bbox.iter().any(|&v| v < 0) {
                return Err(self.schema_err("bbox values must be non-negative integers", &resp));
            }
            if !(0.0..=1.0).contains(&r.confidence) {
                return Err(self.schema_err("confidence outside [0, 1]", &resp));
            }
        }
        Ok(parsed.regions)
    }

    pub fn classify_text(&self, text: &str) -> Result<Option<DataType>, AdapterError> {
        self.expect_role(AdapterRole::TextClassifier)?;
        let names: Vec<&str> = DataType::ALL.iter().map(|t| t.as_str()).collect();
        let resp = self.invoke(&json!({
            "role": "text_classifier",
            "version": PROTOCOL_VERSION,
            "text": text,
            "data_types": names,
        }))?;
        match resp.get("data_type") {
            Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => s
                .parse::<DataType>()
                .map(Some)
                .map_err(|e| self.schema_err(e.to_string(), &resp)),
            _ => Err(self.schema_err("missing \"data_type\" (string or null)", &resp)),
        }
    }

    pub fn classify_icon(
        &self,
        image_path: &Path,
        classes: &[&str],
    ) -> Result<Option<(String, f64)>, AdapterError> {
        self.expect_role(AdapterRole::IconClassifier)?;
        let resp = self.invoke(&json!({
            "role": "icon_classifier",
            "version": PROTOCOL_VERSION,
            "image_path": image_path.display().to_string(),
            "classes": classes,
        }))?;
        let score = resp
            .get("score")
            .and_then(Value::as_f64)
            .ok_or_else(|| self.schema_err("missing numeric \"score\"", &resp))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(self.schema_err("score outside [0, 1]", &resp));
        }
        match resp.get("class") {
            Some(Value::Null) => Ok(None),
            Some(Value::String(c)) => Ok(Some((c.clone(), score))),
            _ => Err(self.schema_err("missing \"class\" (string or null)", &resp)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OcrResponse {
    regions: Vec<OcrRegion>,
}

/// A raw OCR region as the adapter reported it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrRegion {
    pub bbox: [i64; 4],
    pub text: String,
    pub confidence: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adapter that discards its request and prints `response`.
    fn echo(response: &str, role: AdapterRole) -> (tempfile::TempDir, AdapterSpec) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("resp.json");
        std::fs::write(&path, response).unwrap();
        let spec = AdapterSpec {
            program: "sh".into(),
            args: vec!["-c".into(), format!("cat >/dev/null; cat '{}'", path.display())],
            role,
        };
        (dir, spec)
    }

    #[test]
    fn parse_spec() {
        let s = AdapterSpec::parse("python3 'my adapter.py' --x", AdapterRole::Ocr).unwrap();
        assert_eq!(s.program, PathBuf::from("python3"));
        assert_eq!(s.args, ["my adapter.py", "--x"]);
        assert!(matches!(AdapterSpec::parse("  ", AdapterRole::Ocr), Err(AdapterError::EmptySpec)));
    }

    #[test]
    fn ocr_round_trip() {
        let (_d, a) = echo(
            r#"{"regions":[{"bbox":[1,2,30,10],"text":"Email","confidence":0.9}]}"#,
            AdapterRole::Ocr,
        );
        let r = a.ocr(Path::new("x.png")).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].text, "Email");
    }

    #[test]
    fn request_is_delivered_on_stdin() {
        let spec = AdapterSpec {
            program: "sh".into(),
            args: vec!["-c".into(), "read line; printf '{\"echo\":%s}' \"$line\"".into()],
            role: AdapterRole::Ocr,
        };
        let v = spec.invoke(&json!({"role":"ocr","version":1})).unwrap();
        assert_eq!(v["echo"]["role"], "ocr");
        assert_eq!(v["echo"]["version"], 1);
    }

    #[test]
    fn error_kinds_carry_payload() {
        let (_d, a) = echo("not json", AdapterRole::Ocr);
        match a.ocr(Path::new("x.png")) {
            Err(AdapterError::Malformed { payload, .. }) => assert_eq!(payload, "not json"),
            other => panic!("{other:?}"),
        }
        let (_d, a) = echo(r#"{"regions":[{"bbox":[-1,0,3,3],"text":"a","confidence":1}]}"#, AdapterRole::Ocr);
        match a.ocr(Path::new("x.png")) {
            Err(AdapterError::Schema { payload, .. }) => assert!(payload.contains("-1")),
            other => panic!("{other:?}"),
        }
        let (_d, a) = echo(r#"{"data_type":"Emails"}"#, AdapterRole::TextClassifier);
        assert!(matches!(a.classify_text("x"), Err(AdapterError::Schema { .. })));
        let missing = AdapterSpec::parse("/nonexistent/adapter", AdapterRole::Ocr).unwrap();
        assert!(matches!(missing.ocr(Path::new("x")), Err(AdapterError::Launch { .. })));
        let failing = AdapterSpec::parse("sh -c 'echo oops >&2; exit 5'", AdapterRole::Ocr).unwrap();
        match failing.ocr(Path::new("x")) {
            Err(AdapterError::Failed { code, stderr, .. }) => {
                assert_eq!(code, Some(5));
                assert!(stderr.contains("oops"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn classifier_responses() {
        let (_d, a) = echo(r#"{"data_type":"Birthday"}"#, AdapterRole::TextClassifier);
        assert_eq!(a.classify_text("use your birthday").unwrap(), Some(DataType::Birthday));
        let (_d, a) = echo(r#"{"data_type":null}"#, AdapterRole::TextClassifier);
        assert_eq!(a.classify_text("hello").unwrap(), None);
        let (_d, a) = echo(r#"{"class":"Cart","score":0.75}"#, AdapterRole::IconClassifier);
        assert_eq!(
            a.classify_icon(Path::new("c.png"), &["Cart"]).unwrap(),
            Some(("Cart".to_string(), 0.75))
        );
        assert!(matches!(a.ocr(Path::new("x")), Err(AdapterError::WrongRole { .. })));
    }
}
