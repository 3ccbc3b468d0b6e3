//! JSONL corpus persistence: one utterance record per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use super::{BreakSequence, Corpus, Emotion, Split, Utterance};
use crate::{Error, Result};

#[derive(Serialize)]
struct Record<'a> {
    id: &'a str,
    speaker: &'a str,
    emotion: &'a str,
    text: &'a str,
    words: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    breaks: Option<&'a [u8]>,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    read_corpus(BufReader::new(File::open(path)?))
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_corpus(corpus, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    for u in &corpus.utterances {
        let record = Record {
            id: &u.id,
            speaker: &u.speaker,
            emotion: u.emotion.as_str(),
            text: &u.text,
            words: &u.words,
            breaks: u.breaks.as_ref().map(|b| b.labels()),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus<R: Read>(reader: R) -> Result<Corpus> {
    let mut utterances = Vec::new();
    let mut record = 0;
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        record += 1;
        let utt = parse_record(&line).map_err(|message| Error::Schema { record, message })?;
        utt.validate().map_err(|e| Error::Schema {
            record,
            message: e.to_string(),
        })?;
        utterances.push(utt);
    }
    Corpus::new(utterances, Split::Unsplit)
}

fn parse_record(line: &str) -> std::result::Result<Utterance, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let Value::Object(obj) = value else {
        return Err("expected a JSON object".into());
    };
    let string = |obj: &Map<String, Value>, field: &str| -> std::result::Result<String, String> {
        match obj.get(field) {
            None => Err(format!("missing field {field}")),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(format!("field {field} must be a string")),
        }
    };

    let id = string(&obj, "id")?;
    let speaker = string(&obj, "speaker")?;
    let emotion = Emotion::new(string(&obj, "emotion")?).map_err(|e| format!("field emotion: {e}"))?;
    let text = string(&obj, "text")?;
    let words = match obj.get("words") {
        None => return Err("missing field words".into()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|w| w.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()
            .ok_or("field words must be an array of strings")?,
        Some(_) => return Err("field words must be an array of strings".into()),
    };
    let breaks = match obj.get("breaks") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => {
            let labels = items
                .iter()
                .map(|v| v.as_u64().filter(|&l| l <= 1).map(|l| l as u8))
                .collect::<Option<Vec<u8>>>()
                .ok_or("field breaks must contain only 0 and 1")?;
            Some(BreakSequence::new(labels).map_err(|e| format!("field breaks: {e}"))?)
        }
        Some(_) => return Err("field breaks must be an array".into()),
    };
    if let Some(extra) = obj.keys().find(|k| {
        !matches!(k.as_str(), "id" | "speaker" | "emotion" | "text" | "words" | "breaks")
    }) {
        return Err(format!("unknown field {extra}"));
    }
    Ok(Utterance {
        id,
        speaker,
        emotion,
        text,
        words,
        breaks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = concat!(
        r#"{"id":"a","speaker":"s1","emotion":"angry","text":"I said what","words":["I","said","what"],"breaks":[0,1,0]}"#,
        "\n",
        r#"{"id":"b","speaker":"s1","emotion":"sad","text":"oh no","words":["oh","no"]}"#,
        "\n"
    );

    #[test]
    fn round_trip_is_byte_identical() {
        let corpus = read_corpus(SAMPLE.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_corpus(&corpus, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), SAMPLE);
        assert_eq!(corpus.emotion_inventory.len(), 2);
    }

    #[test]
    fn missing_field_names_record_and_field() {
        let mut src = String::new();
        for i in 0..6 {
            src.push_str(&format!(
                r#"{{"id":"u{i}","speaker":"s","emotion":"sad","text":"x","words":["x"]}}"#
            ));
            src.push('\n');
        }
        src.push_str(r#"{"id":"u7","speaker":"s","text":"x","words":["x"]}"#);
        let err = read_corpus(src.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "record 7: missing field emotion");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let line = r#"{"id":"a","speaker":"s","emotion":"sad","text":"x","words":["x"]}"#;
        let src = format!("{line}\n{line}\n");
        assert!(matches!(read_corpus(src.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn breaks_length_checked() {
        let line = r#"{"id":"a","speaker":"s","emotion":"sad","text":"x y","words":["x","y"],"breaks":[0]}"#;
        let err = read_corpus(line.as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("record 1:"), "{err}");
    }
}
