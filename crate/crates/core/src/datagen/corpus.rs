//! Training views of a dataset and their JSONL files.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::error_chain::DpoPair;
use super::sampler::SftSample;
use super::DatagenError;

/// A JSONL record type and the schema tag stored in each line.
pub trait Record: Serialize + DeserializeOwned {
    const SCHEMA: &'static str;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusField {
    Prompt,
    Reasoning,
    Code,
}

/// One language-model text record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub sample: usize,
    pub field: CorpusField,
    pub text: String,
}

/// Supervised pair; the reasoning trace is left out.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftPair {
    pub prompt: String,
    pub code: String,
}

impl Record for PretrainRecord {
    const SCHEMA: &'static str = "sg-pretrain/1";
}

impl Record for SftPair {
    const SCHEMA: &'static str = "sg-sft/1";
}

impl Record for DpoPair {
    const SCHEMA: &'static str = "sg-dpo/1";
}

/// Prompt, reasoning and code of every sample, in that order.
pub fn extract_pretrain_corpus(d: &[SftSample]) -> Vec<PretrainRecord> {
    d.iter()
        .enumerate()
        .flat_map(|(k, s)| {
            [
                (CorpusField::Prompt, &s.prompt),
                (CorpusField::Reasoning, &s.reasoning),
                (CorpusField::Code, &s.code),
            ]
            .map(|(field, text)| PretrainRecord {
                sample: k,
                field,
                text: text.clone(),
            })
        })
        .collect()
}

pub fn sft_pairs(d: &[SftSample]) -> Vec<SftPair> {
    d.iter()
        .map(|s| SftPair {
            prompt: s.prompt.clone(),
            code: s.code.clone(),
        })
        .collect()
}

/// One JSON object per line with sorted keys and a `schema` field.
pub fn write_jsonl<T: Record>(mut w: impl Write, records: &[T]) -> Result<(), DatagenError> {
    for r in records {
        let mut v = serde_json::to_value(r).map_err(|e| DatagenError::Json(e.to_string()))?;
        let obj = v
            .as_object_mut()
            .ok_or_else(|| DatagenError::Json("record is not a JSON object".into()))?;
        obj.insert("schema".into(), Value::String(T::SCHEMA.into()));
        let line = serde_json::to_string(&v).map_err(|e| DatagenError::Json(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| DatagenError::Io(e.to_string()))?;
    }
    Ok(())
}

pub fn to_jsonl<T: Record>(records: &[T]) -> Result<String, DatagenError> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn read_jsonl<T: Record>(r: impl BufRead) -> Result<Vec<T>, DatagenError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| DatagenError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| DatagenError::Json(format!("line {}: {m}", n + 1));
        let mut v: Value = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let schema = v.as_object_mut().and_then(|o| o.remove("schema"));
        match schema {
            Some(Value::String(s)) if s == T::SCHEMA => {}
            other => {
                return Err(bad(format!("expected schema `{}`, found {}", T::SCHEMA, other.unwrap_or(Value::Null))));
            }
        }
        out.push(serde_json::from_value(v).map_err(|e| bad(e.to_string()))?);
    }
    Ok(out)
}
