//! Conversation corpus: raw call transcripts in, retrieval records out.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("line {line}: unknown speaker `{speaker}` (expected respondent or victim)")]
    UnknownSpeaker { line: u64, speaker: String },
}

/// One row of the retrieval corpus: `combined = Q + " " + A1 + " " + A2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationRecord {
    #[serde(rename = "Q")]
    pub respondent_msg: String,
    #[serde(rename = "A1")]
    pub victim_msg_1: String,
    #[serde(rename = "A2")]
    pub victim_msg_2: String,
    #[serde(rename = "combined_text")]
    pub combined: String,
}

impl ConversationRecord {
    pub fn new(q: &str, a1: &str, a2: &str) -> Self {
        let (q, a1, a2) = (q.trim(), a1.trim(), a2.trim());
        Self {
            respondent_msg: q.into(),
            victim_msg_1: a1.into(),
            victim_msg_2: a2.into(),
            combined: [q, a1, a2].iter().filter(|s| !s.is_empty()).copied().collect::<Vec<_>>().join(" "),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Respondent,
    Victim,
}

impl Speaker {
    pub fn parse(tag: &str) -> Option<Self> {
        match tag.trim().to_ascii_lowercase().as_str() {
            "respondent" | "dispatcher" | "operator" | "r" => Some(Speaker::Respondent),
            "victim" | "caller" | "v" => Some(Speaker::Victim),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

impl Turn {
    pub fn respondent(text: &str) -> Self {
        Self { speaker: Speaker::Respondent, text: text.into() }
    }
    pub fn victim(text: &str) -> Self {
        Self { speaker: Speaker::Victim, text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawConversation {
    pub id: String,
    pub turns: Vec<Turn>,
}

/// First respondent turn, then the first pair of adjacent victim turns after
/// it. `None` when the conversation lacks that shape.
fn extract(turns: &[Turn]) -> Option<ConversationRecord> {
    let q_idx = turns.iter().position(|t| t.speaker == Speaker::Respondent && !t.text.trim().is_empty())?;
    let q = &turns[q_idx];
    turns[q_idx + 1..]
        .windows(2)
        .find(|w| {
            w.iter().all(|t| t.speaker == Speaker::Victim && !t.text.trim().is_empty())
        })
        .map(|w| ConversationRecord::new(&q.text, &w[0].text, &w[1].text))
}

/// Build retrieval records, dropping conversations without a respondent
/// message followed by two victim messages. Input order is preserved.
pub fn preprocess_dataset(raw: &[RawConversation]) -> Vec<ConversationRecord> {
    raw.iter().filter_map(|c| extract(&c.turns)).collect()
}

#[derive(Debug, Deserialize)]
struct RawRow {
    conversation_id: String,
    speaker: String,
    text: String,
}

/// Read a raw transcript dump with columns `conversation_id,speaker,text`,
/// one turn per row in spoken order.
pub fn read_raw_csv(reader: impl Read) -> Result<Vec<RawConversation>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let mut record = csv::StringRecord::new();
    let mut conversations: Vec<RawConversation> = Vec::new();
    while rdr.read_record(&mut record).map_err(csv_error)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: RawRow = record.deserialize(Some(&headers)).map_err(csv_error)?;
        let Some(speaker) = Speaker::parse(&row.speaker) else {
            return Err(CorpusError::UnknownSpeaker { line, speaker: row.speaker });
        };
        let turn = Turn { speaker, text: row.text };
        match conversations.iter_mut().find(|c| c.id == row.conversation_id) {
            Some(c) => c.turns.push(turn),
            None => conversations.push(RawConversation { id: row.conversation_id, turns: vec![turn] }),
        }
    }
    Ok(conversations)
}

fn csv_error(e: csv::Error) -> CorpusError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    CorpusError::Parse { line, reason: e.to_string() }
}

pub fn read_raw_csv_file(path: &Path) -> Result<Vec<RawConversation>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    read_raw_csv(file)
}

/// Read a corpus CSV with header `Q,A1,A2,combined_text`. A missing or empty
/// `combined_text` is recomputed from the three messages.
pub fn read_corpus_csv(reader: impl Read) -> Result<Vec<ConversationRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    for required in ["Q", "A1", "A2"] {
        if !headers.iter().any(|h| h == required) {
            return Err(CorpusError::Parse { line: 1, reason: format!("missing column {required}") });
        }
    }
    #[derive(Deserialize)]
    struct Row {
        #[serde(rename = "Q")]
        q: String,
        #[serde(rename = "A1")]
        a1: String,
        #[serde(rename = "A2")]
        a2: String,
        #[serde(default)]
        combined_text: Option<String>,
    }
    let mut out = Vec::new();
    for result in rdr.deserialize::<Row>() {
        let row = result.map_err(csv_error)?;
        let mut record = ConversationRecord::new(&row.q, &row.a1, &row.a2);
        if let Some(c) = row.combined_text.filter(|c| !c.trim().is_empty()) {
            record.combined = c;
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_corpus_file(path: &Path) -> Result<Vec<ConversationRecord>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    read_corpus_csv(file)
}

pub fn write_corpus_csv(records: &[ConversationRecord], writer: impl Write) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["Q", "A1", "A2", "combined_text"]).map_err(csv_error)?;
    for r in records {
        wtr.write_record([&r.respondent_msg, &r.victim_msg_1, &r.victim_msg_2, &r.combined]).map_err(csv_error)?;
    }
    wtr.flush().map_err(|source| CorpusError::Io { path: "<output>".into(), source })?;
    Ok(())
}

pub fn write_corpus_file(records: &[ConversationRecord], path: &Path) -> Result<(), CorpusError> {
    let file = std::fs::File::create(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    write_corpus_csv(records, file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(id: &str, turns: Vec<Turn>) -> RawConversation {
        RawConversation { id: id.into(), turns }
    }

    #[test]
    fn west_high_row() {
        let raw = vec![conv(
            "1",
            vec![
                Turn::respondent("9-1-1, what's your emergency?"),
                Turn::victim("I'm at West High School. There's a guy with a gun."),
                Turn::victim("West High."),
            ],
        )];
        let out = preprocess_dataset(&raw);
        assert_eq!(out.len(), 1);
        assert_eq!(
            out[0].combined,
            "9-1-1, what's your emergency? I'm at West High School. There's a guy with a gun. West High."
        );
    }

    #[test]
    fn single_victim_turn_is_excluded() {
        let raw = vec![conv("1", vec![Turn::respondent("9-1-1?"), Turn::victim("help")])];
        assert!(preprocess_dataset(&raw).is_empty());
        assert!(preprocess_dataset(&[]).is_empty());
    }

    #[test]
    fn victim_pair_must_be_adjacent_and_after_respondent() {
        let raw = vec![
            conv("a", vec![Turn::victim("hello?"), Turn::victim("anyone?"), Turn::respondent("9-1-1")]),
            conv(
                "b",
                vec![
                    Turn::respondent("9-1-1"),
                    Turn::victim("fire"),
                    Turn::respondent("where?"),
                    Turn::victim("main street"),
                    Turn::victim("hurry"),
                ],
            ),
        ];
        let out = preprocess_dataset(&raw);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].combined, "9-1-1 main street hurry");
    }

    #[test]
    fn raw_csv_groups_turns_by_conversation() {
        let csv = "conversation_id,speaker,text\n1,respondent,911?\n2,dispatcher,911 what is it\n1,victim,fire\n1,caller,\"on main, hurry\"\n";
        let convs = read_raw_csv(csv.as_bytes()).unwrap();
        assert_eq!(convs.len(), 2);
        assert_eq!(convs[0].turns.len(), 3);
        assert_eq!(convs[0].turns[2].text, "on main, hurry");
    }

    #[test]
    fn raw_csv_reports_unknown_speaker_line() {
        let csv = "conversation_id,speaker,text\n1,respondent,a\n1,bystander,b\n";
        match read_raw_csv(csv.as_bytes()) {
            Err(CorpusError::UnknownSpeaker { line, speaker }) => {
                assert_eq!(speaker, "bystander");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn corpus_csv_round_trip() {
        let records = vec![ConversationRecord::new("Q1", "a, b", "c \"d\"")];
        let mut buf = Vec::new();
        write_corpus_csv(&records, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("Q,A1,A2,combined_text\n"));
        assert_eq!(read_corpus_csv(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn corpus_csv_requires_header() {
        assert!(matches!(read_corpus_csv("x,y\n1,2\n".as_bytes()), Err(CorpusError::Parse { line: 1, .. })));
    }
}
