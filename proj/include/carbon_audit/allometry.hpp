#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace carbon_audit::allometry {

// Equation selector. Every tree record resolves to exactly one class.
enum class FamilyClass { Fruit, Musacea, Cacao, Timber };

inline constexpr std::array<FamilyClass, 4> kAllFamilies = {
    FamilyClass::Fruit, FamilyClass::Musacea, FamilyClass::Cacao, FamilyClass::Timber};

// Canonical spelling used in files and reports: "Fruit", "Musacea", "Cacao", "Timber".
std::string_view to_string(FamilyClass family);

// Case-insensitive parse of the canonical names. nullopt if unknown.
std::optional<FamilyClass> parse_family_class(std::string_view name);

// Timber results below this diameter carry a warning: the quadratic is not
// monotone for d < 6.95 / (2 * 0.74) and no validity range is given.
inline constexpr double kTimberSmallDbhCm = 5.0;

// Per-tree equations. DBH in centimeters, result in kilograms.
// Each throws DomainError for non-finite or non-positive diameters.
double agb_fruit(double dbh_cm);
double agb_musacea(double dbh_cm);
double agb_cacao(double dbh_cm);
double agb_timber(double dbh_cm);

struct TreeAgb {
    std::string record_id;
    FamilyClass family = FamilyClass::Fruit;
    double dbh_cm = 0.0;
    double agb_kg = 0.0;
    std::optional<std::string> warning;
};

// Dispatches to the family's equation.
TreeAgb tree_agb(FamilyClass family, double dbh_cm, std::string record_id = {});

/// Keyword table mapping species text to a family class.
///
/// Defaults cover the families named in the field campaign (banana and cacao);
/// everything else must come from an override file. Lookup is case-insensitive:
/// the whole species string is tried first, then each word of it in order
/// (words split on whitespace, '-', '_', ',', '.', '/', '(' and ')').
/// Overrides shadow defaults.
class FamilyMapping {
public:
    FamilyMapping();

    static FamilyMapping defaults_only() { return FamilyMapping(); }
    static FamilyMapping empty();

    // Parses `keyword=FamilyClass` lines; '#' starts a comment.
    // Throws ParseError with the line number on malformed lines.
    static FamilyMapping from_text(std::string_view text, bool include_defaults = true);

    void add(std::string_view keyword, FamilyClass family);
    void merge_overrides(std::string_view text);

    // Throws ClassificationError naming the species when nothing matches.
    FamilyClass classify(std::string_view species_text) const;
    std::optional<FamilyClass> try_classify(std::string_view species_text) const;

    const std::vector<std::pair<std::string, FamilyClass>>& rules() const { return rules_; }

private:
    struct EmptyTag {};
    explicit FamilyMapping(EmptyTag) {}

    std::optional<FamilyClass> lookup(std::string_view lowered_key) const;

    // Later entries shadow earlier ones.
    std::vector<std::pair<std::string, FamilyClass>> rules_;
};

FamilyClass classify_family(std::string_view species_text, const FamilyMapping& mapping);

} // namespace carbon_audit::allometry
