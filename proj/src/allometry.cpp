#include "carbon_audit/allometry.hpp"

#include "carbon_audit/error.hpp"
#include "carbon_audit/text.hpp"

#include <cmath>
#include <string>

namespace carbon_audit::allometry {

namespace {

void check_dbh(double dbh_cm, std::string_view equation) {
    if (!std::isfinite(dbh_cm) || dbh_cm <= 0.0) {
        throw DomainError(std::string(equation) + ": diameter must be finite and positive, got " +
                          text::format_double(dbh_cm) + " cm");
    }
}

bool is_word_separator(char c) {
    return c == ' ' || c == '\t' || c == '-' || c == '_' || c == ',' || c == '.' || c == '/' ||
           c == '(' || c == ')';
}

} // namespace

std::string_view to_string(FamilyClass family) {
    switch (family) {
    case FamilyClass::Fruit: return "Fruit";
    case FamilyClass::Musacea: return "Musacea";
    case FamilyClass::Cacao: return "Cacao";
    case FamilyClass::Timber: return "Timber";
    }
    return "?";
}

std::optional<FamilyClass> parse_family_class(std::string_view name) {
    name = text::trim(name);
    for (auto f : kAllFamilies) {
        if (text::iequals(name, to_string(f))) return f;
    }
    return std::nullopt;
}

// log10(AGB) = -0.834 + 2.223 * log10(DBH)
double agb_fruit(double dbh_cm) {
    check_dbh(dbh_cm, "fruit");
    return std::pow(10.0, -0.834 + 2.223 * std::log10(dbh_cm));
}

double agb_musacea(double dbh_cm) {
    check_dbh(dbh_cm, "musacea");
    return 0.030 * std::pow(dbh_cm, 2.13);
}

double agb_cacao(double dbh_cm) {
    check_dbh(dbh_cm, "cacao");
    return 0.1208 * std::pow(dbh_cm, 1.98);
}

double agb_timber(double dbh_cm) {
    check_dbh(dbh_cm, "timber");
    return 21.3 - 6.95 * dbh_cm + 0.74 * dbh_cm * dbh_cm;
}

TreeAgb tree_agb(FamilyClass family, double dbh_cm, std::string record_id) {
    TreeAgb out;
    out.record_id = std::move(record_id);
    out.family = family;
    out.dbh_cm = dbh_cm;
    switch (family) {
    case FamilyClass::Fruit: out.agb_kg = agb_fruit(dbh_cm); break;
    case FamilyClass::Musacea: out.agb_kg = agb_musacea(dbh_cm); break;
    case FamilyClass::Cacao: out.agb_kg = agb_cacao(dbh_cm); break;
    case FamilyClass::Timber:
        out.agb_kg = agb_timber(dbh_cm);
        if (dbh_cm < kTimberSmallDbhCm) {
            out.warning = "timber equation evaluated below " + text::format_double(kTimberSmallDbhCm) +
                          " cm DBH (" + text::format_double(dbh_cm) + " cm), outside its monotone range";
        }
        break;
    }
    return out;
}

FamilyMapping::FamilyMapping() {
    rules_ = {
        {"musaceae", FamilyClass::Musacea}, {"musa", FamilyClass::Musacea},
        {"banana", FamilyClass::Musacea},   {"cacao", FamilyClass::Cacao},
        {"cocoa", FamilyClass::Cacao},      {"theobroma", FamilyClass::Cacao},
    };
}

FamilyMapping FamilyMapping::empty() { return FamilyMapping(EmptyTag{}); }

void FamilyMapping::add(std::string_view keyword, FamilyClass family) {
    auto key = text::to_lower(text::trim(keyword));
    if (key.empty()) throw ParseError("family mapping: empty keyword");
    rules_.emplace_back(std::move(key), family);
}

void FamilyMapping::merge_overrides(std::string_view content) {
    auto all = text::lines(content);
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto line = all[i];
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = text::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        const auto where = "family mapping line " + std::to_string(i + 1);
        if (eq == std::string_view::npos) throw ParseError(where + ": expected keyword=FamilyClass");
        auto keyword = text::trim(line.substr(0, eq));
        auto cls_text = text::trim(line.substr(eq + 1));
        auto cls = parse_family_class(cls_text);
        if (!cls) {
            throw ParseError(where + ": unknown family class '" + std::string(cls_text) +
                             "' (valid: Fruit, Musacea, Cacao, Timber)");
        }
        if (keyword.empty()) throw ParseError(where + ": empty keyword");
        add(keyword, *cls);
    }
}

FamilyMapping FamilyMapping::from_text(std::string_view content, bool include_defaults) {
    FamilyMapping m = include_defaults ? FamilyMapping() : FamilyMapping::empty();
    m.merge_overrides(content);
    return m;
}

std::optional<FamilyClass> FamilyMapping::lookup(std::string_view lowered_key) const {
    for (auto it = rules_.rbegin(); it != rules_.rend(); ++it) {
        if (it->first == lowered_key) return it->second;
    }
    return std::nullopt;
}

std::optional<FamilyClass> FamilyMapping::try_classify(std::string_view species_text) const {
    const auto lowered = text::to_lower(text::trim(species_text));
    if (lowered.empty()) return std::nullopt;
    if (auto hit = lookup(lowered)) return hit;

    std::size_t i = 0;
    while (i < lowered.size()) {
        while (i < lowered.size() && is_word_separator(lowered[i])) ++i;
        std::size_t j = i;
        while (j < lowered.size() && !is_word_separator(lowered[j])) ++j;
        if (j > i) {
            if (auto hit = lookup(std::string_view(lowered).substr(i, j - i))) return hit;
        }
        i = j;
    }
    return std::nullopt;
}

FamilyClass FamilyMapping::classify(std::string_view species_text) const {
    if (text::trim(species_text).empty()) throw ClassificationError("empty species text");
    if (auto hit = try_classify(species_text)) return *hit;
    throw ClassificationError("unmapped species '" + std::string(species_text) +
                              "': add a keyword=FamilyClass rule to the family mapping");
}

FamilyClass classify_family(std::string_view species_text, const FamilyMapping& mapping) {
    return mapping.classify(species_text);
}

} // namespace carbon_audit::allometry
