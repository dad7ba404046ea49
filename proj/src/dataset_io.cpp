#include "vesselseg/dataset_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "vesselseg/image_io.hpp"

namespace vesselseg {

std::string format_value(double v) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "feature values must be finite");
    if (v == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
    return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool parse_number(std::string_view tok, double& out) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc{} && res.ptr == tok.data() + tok.size() && std::isfinite(out);
}

std::optional<Label> parse_label(std::string_view tok) {
    if (tok == "vessel") return Label::Vessel;
    if (tok == "background") return Label::Background;
    return std::nullopt;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

// ---- ARFF ----

std::string arff_quote(std::string_view name) {
    const bool plain = !name.empty() && name.find_first_of(" \t,'\"%{}\\") == std::string_view::npos;
    if (plain) return std::string(name);
    std::string out = "'";
    for (char c : name) {
        if (c == '\'' || c == '\\') out += '\\';
        out += c;
    }
    return out + "'";
}

/// Reads one possibly quoted token from the front of `s` and advances it.
std::string take_token(std::string_view& s, std::size_t line) {
    s = trim(s);
    if (s.empty()) throw ParseError(line, "expected a name");
    std::string out;
    if (s.front() == '\'' || s.front() == '"') {
        const char q = s.front();
        std::size_t i = 1;
        for (; i < s.size() && s[i] != q; ++i) {
            if (s[i] == '\\' && i + 1 < s.size()) ++i;
            out += s[i];
        }
        if (i >= s.size()) throw ParseError(line, "unterminated quote");
        s.remove_prefix(i + 1);
        return out;
    }
    std::size_t i = 0;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != '{' && s[i] != ',') ++i;
    out = std::string(s.substr(0, i));
    s.remove_prefix(i);
    return out;
}

/// Splits a data row or nominal list on commas, honoring quotes.
std::vector<std::string> split_fields(std::string_view s, std::size_t line) {
    std::vector<std::string> out;
    for (;;) {
        s = trim(s);
        if (!s.empty() && (s.front() == '\'' || s.front() == '"')) {
            out.push_back(take_token(s, line));
            s = trim(s);
        } else {
            const std::size_t comma = s.find(',');
            out.emplace_back(trim(s.substr(0, comma)));
            s = comma == std::string_view::npos ? std::string_view{} : s.substr(comma);
        }
        if (s.empty()) break;
        if (s.front() != ',') throw ParseError(line, "expected ','");
        s.remove_prefix(1);
    }
    return out;
}

struct ArffAttribute {
    std::string name;
    bool numeric = false;
    std::vector<std::string> nominal;
    std::size_t line = 0;
};

}  // namespace

std::string to_arff(const Dataset& ds) {
    ds.validate();
    std::string out = "@RELATION " + arff_quote(ds.relation) + "\n\n";
    for (const auto& name : ds.config.feature_names()) out += "@ATTRIBUTE " + arff_quote(name) + " NUMERIC\n";
    out += "@ATTRIBUTE class {background,vessel}\n\n@DATA\n";
    for (const Sample& s : ds.samples) {
        for (double v : s.features) out += format_value(v) + ",";
        out += to_string(s.label);
        out += '\n';
    }
    return out;
}

Dataset from_arff(std::string_view text) {
    Dataset ds;
    std::vector<ArffAttribute> attrs;
    bool have_relation = false;
    bool in_data = false;
    std::size_t line_no = 0;

    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '%') continue;

        if (in_data) {
            if (line.front() == '{') throw ParseError(line_no, "sparse rows are not supported");
            const auto fields = split_fields(line, line_no);
            if (fields.size() != attrs.size()) {
                throw ParseError(line_no, "expected " + std::to_string(attrs.size()) + " values, found " +
                                              std::to_string(fields.size()));
            }
            Sample s;
            s.features.resize(fields.size() - 1);
            for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
                if (!parse_number(fields[i], s.features[i])) {
                    throw ParseError(line_no, "invalid numeric value '" + fields[i] + "'");
                }
            }
            const auto label = parse_label(fields.back());
            if (!label) throw ParseError(line_no, "invalid class value '" + fields.back() + "'");
            s.label = *label;
            ds.samples.push_back(std::move(s));
            continue;
        }

        if (line.front() != '@') throw ParseError(line_no, "expected a declaration");
        std::string_view rest = line;
        const std::string keyword = lower(take_token(rest, line_no));
        if (keyword == "@relation") {
            if (have_relation || !attrs.empty()) throw ParseError(line_no, "unexpected @RELATION");
            ds.relation = take_token(rest, line_no);
            if (!trim(rest).empty()) throw ParseError(line_no, "trailing text after relation name");
            have_relation = true;
        } else if (keyword == "@attribute") {
            if (!have_relation) throw ParseError(line_no, "@ATTRIBUTE before @RELATION");
            ArffAttribute a;
            a.line = line_no;
            a.name = take_token(rest, line_no);
            rest = trim(rest);
            if (!rest.empty() && rest.front() == '{') {
                if (rest.back() != '}') throw ParseError(line_no, "unterminated nominal list");
                a.nominal = split_fields(rest.substr(1, rest.size() - 2), line_no);
            } else {
                const std::string type = lower(rest);
                if (type == "numeric" || type == "real" || type == "integer") {
                    a.numeric = true;
                } else if (type == "string" || type.starts_with("date") || type == "relational") {
                    throw Error(ErrorCode::SchemaError,
                                "attribute '" + a.name + "' has unsupported type " + std::string(rest));
                } else {
                    throw ParseError(line_no, "unknown attribute type '" + std::string(rest) + "'");
                }
            }
            attrs.push_back(std::move(a));
        } else if (keyword == "@data") {
            if (!have_relation) throw ParseError(line_no, "@DATA before @RELATION");
            if (attrs.empty() || attrs.back().numeric) {
                throw Error(ErrorCode::SchemaError, "the last attribute must be the nominal class");
            }
            auto values = attrs.back().nominal;
            std::sort(values.begin(), values.end());
            if (values != std::vector<std::string>{"background", "vessel"}) {
                throw Error(ErrorCode::SchemaError, "class attribute must be {background,vessel}");
            }
            for (std::size_t i = 0; i + 1 < attrs.size(); ++i) {
                if (!attrs[i].numeric) {
                    throw Error(ErrorCode::SchemaError, "attribute '" + attrs[i].name + "' is not numeric");
                }
            }
            in_data = true;
        } else {
            throw ParseError(line_no, "unknown declaration '" + keyword + "'");
        }
    }
    if (!in_data) throw ParseError(line_no, "missing @DATA section");

    std::vector<std::string> names;
    for (std::size_t i = 0; i + 1 < attrs.size(); ++i) names.push_back(attrs[i].name);
    if (names.empty()) throw Error(ErrorCode::SchemaError, "no feature attributes");
    ds.config = FeatureConfig::from_names(names);
    return ds;
}

void export_arff(const Dataset& ds, const std::filesystem::path& path) { write_text(path, to_arff(ds)); }

Dataset import_arff(const std::filesystem::path& path) { return from_arff(read_text(path)); }

// ---- CSV ----

namespace {

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

struct CsvRecord {
    std::vector<std::string> fields;
    std::size_t line = 0;
};

std::vector<CsvRecord> parse_csv(std::string_view text) {
    std::vector<CsvRecord> records;
    std::size_t line = 1;
    std::size_t i = 0;
    while (i < text.size()) {
        CsvRecord rec;
        rec.line = line;
        for (;;) {
            std::string field;
            if (i < text.size() && text[i] == '"') {
                ++i;
                for (;;) {
                    if (i >= text.size()) throw ParseError(rec.line, "unterminated quoted field");
                    if (text[i] == '"') {
                        if (i + 1 < text.size() && text[i + 1] == '"') {
                            field += '"';
                            i += 2;
                            continue;
                        }
                        ++i;
                        break;
                    }
                    if (text[i] == '\n') ++line;
                    field += text[i++];
                }
                if (i < text.size() && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
                    throw ParseError(line, "unexpected character after quoted field");
                }
            } else {
                while (i < text.size() && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
                    if (text[i] == '"') throw ParseError(line, "quote inside unquoted field");
                    field += text[i++];
                }
            }
            rec.fields.push_back(std::move(field));
            if (i < text.size() && text[i] == ',') {
                ++i;
                continue;
            }
            break;
        }
        if (i < text.size() && text[i] == '\r') ++i;
        if (i < text.size() && text[i] == '\n') ++i;
        ++line;
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace

std::string to_csv(const Dataset& ds) {
    ds.validate();
    std::string out;
    for (const auto& name : ds.config.feature_names()) out += csv_field(name) + ",";
    out += "class\r\n";
    for (const Sample& s : ds.samples) {
        for (double v : s.features) out += format_value(v) + ",";
        out += to_string(s.label);
        out += "\r\n";
    }
    return out;
}

Dataset from_csv(std::string_view text, std::string relation) {
    const auto records = parse_csv(text);
    if (records.empty()) throw ParseError(1, "missing header row");
    const auto& header = records.front().fields;
    if (header.back() != "class") throw ParseError(1, "last column must be 'class'");
    if (header.size() < 2) throw Error(ErrorCode::SchemaError, "no feature columns");

    Dataset ds;
    ds.relation = std::move(relation);
    ds.config = FeatureConfig::from_names(std::vector<std::string>(header.begin(), header.end() - 1));
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.fields.size() != header.size()) {
            throw ParseError(rec.line, "expected " + std::to_string(header.size()) + " fields, found " +
                                           std::to_string(rec.fields.size()));
        }
        Sample s;
        s.features.resize(header.size() - 1);
        for (std::size_t i = 0; i + 1 < rec.fields.size(); ++i) {
            if (!parse_number(rec.fields[i], s.features[i])) {
                throw ParseError(rec.line, "invalid numeric value '" + rec.fields[i] + "'");
            }
        }
        const auto label = parse_label(rec.fields.back());
        if (!label) throw ParseError(rec.line, "invalid class value '" + rec.fields.back() + "'");
        s.label = *label;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void export_csv(const Dataset& ds, const std::filesystem::path& path) { write_text(path, to_csv(ds)); }

Dataset import_csv(const std::filesystem::path& path) { return from_csv(read_text(path)); }

}  // namespace vesselseg
