#include "han/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "han/error.hpp"
#include "han/timeparse.hpp"

namespace han::corpus {

namespace {

using ordered_json = nlohmann::ordered_json;

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

bool is_space_char(unsigned char c) { return std::isspace(c) != 0; }

}  // namespace

std::vector<std::vector<std::string>> NoteBurst::merged_sentences() const {
  std::vector<std::vector<std::string>> out;
  for (const auto& note : notes) {
    out.insert(out.end(), note.sentences.begin(), note.sentences.end());
  }
  return out;
}

std::vector<RawPatient> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path);
  std::vector<RawPatient> patients;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path + " line " + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("malformed JSON at " + where + ": " + e.what());
    }
    RawPatient p;
    try {
      p.patient_id = j.at("patient_id").get<std::string>();
      p.age = j.at("age").get<int>();
      for (const auto& jn : j.at("notes")) {
        RawNote n;
        n.note_id = jn.at("note_id").get<std::string>();
        n.charttime = parse_utc(jn.at("charttime").get<std::string>());
        n.is_error = jn.at("is_error").get<bool>();
        n.text = jn.at("text").get<std::string>();
        p.notes.push_back(std::move(n));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("bad patient record at " + where + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(std::string(e.what()) + " at " + where);
    }
    if (!seen.insert(p.patient_id).second) {
      throw ValidationError("duplicate patient_id '" + p.patient_id + "' at " +
                            where);
    }
    patients.push_back(std::move(p));
  }
  return patients;
}

void write_corpus(const std::vector<RawPatient>& patients,
                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus file: " + path);
  for (const auto& p : patients) {
    ordered_json j;
    j["patient_id"] = p.patient_id;
    j["age"] = p.age;
    ordered_json notes = ordered_json::array();
    for (const auto& n : p.notes) {
      ordered_json jn;
      jn["note_id"] = n.note_id;
      jn["charttime"] = format_utc(n.charttime);
      jn["is_error"] = n.is_error;
      jn["text"] = n.text;
      notes.push_back(std::move(jn));
    }
    j["notes"] = std::move(notes);
    out << j.dump() << '\n';
  }
  if (!out) throw Error("failed writing corpus file: " + path);
}

std::vector<RawPatient> filter_patients(std::vector<RawPatient> patients,
                                        int min_age) {
  std::vector<RawPatient> out;
  out.reserve(patients.size());
  for (auto& p : patients) {
    if (p.age < min_age) continue;
    std::erase_if(p.notes, [](const RawNote& n) { return n.is_error; });
    if (p.notes.empty()) continue;
    out.push_back(std::move(p));
  }
  return out;
}

ProcessedNote preprocess_note(const RawNote& note) {
  ProcessedNote out;
  out.note_id = note.note_id;
  out.charttime = note.charttime;

  std::vector<std::string> sentence;
  std::string token;
  const auto flush_token = [&] {
    if (!token.empty()) {
      sentence.push_back(std::move(token));
      token.clear();
    }
  };
  const auto flush_sentence = [&] {
    flush_token();
    if (!sentence.empty()) {
      out.sentences.push_back(std::move(sentence));
      sentence.clear();
    }
  };

  const std::string& text = note.text;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (is_word_char(c)) {
      token += static_cast<char>(std::tolower(c));
    } else if (is_space_char(c)) {
      flush_token();
      if (c == '\n') flush_sentence();
    } else {
      flush_token();
      sentence.push_back(std::string(1, static_cast<char>(c)));
      const bool at_end = i + 1 == text.size();
      const bool before_space =
          !at_end && is_space_char(static_cast<unsigned char>(text[i + 1]));
      if (is_terminal(static_cast<char>(c)) && (at_end || before_space)) {
        flush_sentence();
      }
    }
  }
  flush_sentence();
  return out;
}

std::string render_note(const ProcessedNote& note) {
  std::string out;
  for (std::size_t s = 0; s < note.sentences.size(); ++s) {
    if (s) out += '\n';
    const auto& sentence = note.sentences[s];
    for (std::size_t t = 0; t < sentence.size(); ++t) {
      if (t > 0) {
        const std::string& prev = sentence[t - 1];
        // A space after a mid-sentence terminal token would re-split here.
        const bool glue = prev.size() == 1 && is_terminal(prev[0]);
        if (!glue) out += ' ';
      }
      out += sentence[t];
    }
  }
  return out;
}

std::vector<NoteBurst> segment_bursts(std::vector<ProcessedNote> notes,
                                      std::int64_t interval_seconds) {
  if (interval_seconds < 0) {
    throw ValidationError("burst interval must be non-negative");
  }
  std::stable_sort(notes.begin(), notes.end(),
                   [](const ProcessedNote& a, const ProcessedNote& b) {
                     return a.charttime < b.charttime;
                   });
  std::vector<NoteBurst> bursts;
  std::size_t i = 0;
  while (i < notes.size()) {
    NoteBurst burst;
    burst.start_time = notes[i].charttime;
    while (i < notes.size() &&
           notes[i].charttime <= burst.start_time + interval_seconds) {
      burst.notes.push_back(std::move(notes[i]));
      ++i;
    }
    bursts.push_back(std::move(burst));
  }
  return bursts;
}

std::vector<PatientSequence> build_sequences(
    const std::vector<RawPatient>& patients, std::int64_t interval_seconds) {
  std::vector<PatientSequence> out;
  out.reserve(patients.size());
  for (const auto& p : patients) {
    std::vector<ProcessedNote> processed;
    for (const auto& n : p.notes) {
      ProcessedNote pn = preprocess_note(n);
      if (!pn.sentences.empty()) processed.push_back(std::move(pn));
    }
    if (processed.empty()) continue;
    PatientSequence seq;
    seq.patient_id = p.patient_id;
    seq.bursts = segment_bursts(std::move(processed), interval_seconds);
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace han::corpus
