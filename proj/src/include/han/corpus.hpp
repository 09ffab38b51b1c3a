#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace han::corpus {

struct RawNote {
  std::string note_id;
  std::int64_t charttime = 0;  // seconds since epoch, UTC
  bool is_error = false;
  std::string text;
};

struct RawPatient {
  std::string patient_id;
  int age = 0;
  std::vector<RawNote> notes;
};

// A note after tokenization: sentences of lowercase tokens.
struct ProcessedNote {
  std::string note_id;
  std::int64_t charttime = 0;
  std::vector<std::vector<std::string>> sentences;
};

// Notes charted within `interval` of the burst anchor, merged into one
// document for the encoder.
struct NoteBurst {
  std::int64_t start_time = 0;  // anchor note's charttime
  std::vector<ProcessedNote> notes;

  // The burst's document: member sentences concatenated in note order.
  std::vector<std::vector<std::string>> merged_sentences() const;
};

struct PatientSequence {
  std::string patient_id;
  std::vector<NoteBurst> bursts;
};

// One JSON object per line:
//   {"patient_id": ..., "age": ..., "notes": [{"note_id", "charttime",
//    "is_error", "text"}, ...]}
// Throws ParseError (naming the line) on malformed input and ValidationError
// on duplicate patient ids.
std::vector<RawPatient> load_corpus(const std::string& path);
void write_corpus(const std::vector<RawPatient>& patients,
                  const std::string& path);

// Keeps patients aged >= min_age, removes notes flagged as chart errors, and
// drops patients left without notes.
std::vector<RawPatient> filter_patients(std::vector<RawPatient> patients,
                                        int min_age = 18);

// Lowercases, splits tokens on maximal alphanumeric runs (other non-space
// characters become single-character tokens), and breaks sentences at
// terminal punctuation (. ! ?) followed by whitespace and at newlines.
// Empty sentences are dropped.
ProcessedNote preprocess_note(const RawNote& note);

// Renders a processed note back to normalized text (tokens space-separated,
// sentences newline-separated; no space after a mid-sentence terminal
// punctuation token so that preprocess(render(x)) == x).
std::string render_note(const ProcessedNote& note);

// Greedy single-pass grouping: the earliest unassigned note anchors a burst;
// a note joins while charttime <= anchor + interval_seconds (inclusive).
// Input order among equal charttimes is preserved. Burst start times
// strictly increase and every note lands in exactly one burst.
std::vector<NoteBurst> segment_bursts(std::vector<ProcessedNote> notes,
                                      std::int64_t interval_seconds);

// Full pipeline for already-filtered patients: preprocess, drop notes with
// no sentences, segment bursts, and drop patients with no bursts left.
std::vector<PatientSequence> build_sequences(
    const std::vector<RawPatient>& patients, std::int64_t interval_seconds);

}  // namespace han::corpus
