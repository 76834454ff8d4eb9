#include "carbon_audit/cli.hpp"

#include "carbon_audit/allometry.hpp"
#include "carbon_audit/audit.hpp"
#include "carbon_audit/crownmatch.hpp"
#include "carbon_audit/error.hpp"
#include "carbon_audit/fielddata.hpp"
#include "carbon_audit/io.hpp"
#include "carbon_audit/raster.hpp"
#include "carbon_audit/render.hpp"
#include "carbon_audit/text.hpp"
#include "carbon_audit/zonal.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

namespace carbon_audit::cli {

namespace {

namespace fs = std::filesystem;

struct AuditArgs {
    std::string sites;
    std::vector<std::string> fields;
    std::string raster;
    std::string out;
    double target_pixel_m = zonal::kDefaultTargetPixelM;
    double cap_m = crownmatch::kDefaultCapM;
    std::string family_map;
    std::string format = "both";
    bool render = false;
    bool allow_multipolygon = false;
    int threads = 0;
    bool timestamp = false;
    std::string config;
};

struct AllometryArgs {
    std::string family;
    double dbh = 0.0;
    std::string field;
    std::string family_map;
    std::string out;
};

struct MatchArgs {
    std::string field;
    std::string crowns;
    double cap_m = crownmatch::kDefaultCapM;
    std::string out;
    bool crown_agb = false;
    std::string family_map;
};

struct RenderArgs {
    std::string raster;
    std::string sites;
    std::string site;
    std::string crowns;
    double target_pixel_m = zonal::kDefaultTargetPixelM;
    std::string out;
    bool allow_multipolygon = false;
};

struct Parsed {
    AuditArgs audit;
    AllometryArgs allometry;
    MatchArgs match;
    RenderArgs render;
};

std::string family_list() {
    std::string s;
    for (auto f : allometry::kAllFamilies) s += (s.empty() ? "" : ", ") + text::to_lower(allometry::to_string(f));
    return s;
}

std::unique_ptr<CLI::App> build_app(Parsed& p) {
    auto app = std::make_unique<CLI::App>("Forest-carbon audit: field ground truth vs. satellite AGB density",
                                          "carbon-audit");
    app->require_subcommand(1);

    auto* audit = app->add_subcommand("audit", "Audit sites: ground truth, filtered raster estimate, overestimation factor");
    audit->add_option("--sites", p.audit.sites, "GeoJSON site polygons")->required();
    audit->add_option("--field", p.audit.fields, "Field CSV per site: <site_id>=<path>, or a path named <site_id>.csv")
        ->required();
    audit->add_option("--raster", p.audit.raster, "AGB density raster (.tif/.tiff GeoTIFF or .asc ESRI grid)")->required();
    audit->add_option("--out", p.audit.out, "Output directory")->required();
    audit->add_option("--target-pixel-m", p.audit.target_pixel_m, "Interpolation cell size in metres (default 1.0)");
    audit->add_option("--cap-m", p.audit.cap_m, "Crown matching distance cap in metres (default 3.0)");
    audit->add_option("--family-map", p.audit.family_map, "Species-to-family override file (keyword=FamilyClass)");
    audit->add_option("--format", p.audit.format, "Report format: json, csv or both (default both)")
        ->check(CLI::IsMember({"json", "csv", "both"}));
    audit->add_flag("--render", p.audit.render, "Also write site_<id>.svg heatmaps");
    audit->add_flag("--allow-multipolygon", p.audit.allow_multipolygon,
                    "Accept multi-part site geometries (first part is used)");
    audit->add_option("--threads", p.audit.threads, "Maximum sites audited concurrently (0 = runtime default)");
    audit->add_flag("--timestamp", p.audit.timestamp, "Record a UTC timestamp in the report metadata");
    audit->add_option("--config", p.audit.config,
                      "key=value file for target_pixel_m, cap_m, family_map, format, render, threads");

    auto* allo = app->add_subcommand("allometry", "Per-tree aboveground biomass (kg) from DBH");
    allo->add_option("--family", p.allometry.family, "Family class: " + family_list());
    allo->add_option("--dbh", p.allometry.dbh, "Diameter at breast height in cm");
    allo->add_option("--field", p.allometry.field, "Field CSV for batch mode (appends an agb_kg column)");
    allo->add_option("--family-map", p.allometry.family_map, "Species-to-family override file");
    allo->add_option("--out", p.allometry.out, "Batch output file (default stdout)");

    auto* match = app->add_subcommand("match", "Assign field records to detected crown boxes");
    match->add_option("--field", p.match.field, "Field CSV")->required();
    match->add_option("--crowns", p.match.crowns, "Crown boxes (.csv or .geojson)")->required();
    match->add_option("--cap-m", p.match.cap_m, "Distance cap in metres (default 3.0)");
    match->add_option("--out", p.match.out, "Output directory (default: matches to stdout)");
    match->add_flag("--crown-agb", p.match.crown_agb, "Also write per-crown AGB (crown_agb.csv)");
    match->add_option("--family-map", p.match.family_map, "Species-to-family override file");

    auto* render = app->add_subcommand("render", "SVG heatmap of the interpolated raster over a site");
    render->add_option("--raster", p.render.raster, "AGB density raster")->required();
    render->add_option("--sites", p.render.sites, "GeoJSON site polygons")->required();
    render->add_option("--site", p.render.site, "Site id to render (default: first valid site)");
    render->add_option("--crowns", p.render.crowns, "Crown boxes to overlay (.csv or .geojson)");
    render->add_option("--target-pixel-m", p.render.target_pixel_m, "Interpolation cell size in metres (default 1.0)");
    render->add_option("--out", p.render.out, "Output SVG path")->required();
    render->add_flag("--allow-multipolygon", p.render.allow_multipolygon, "Accept multi-part site geometries");
    return app;
}

allometry::FamilyMapping load_mapping(const std::string& path) {
    if (path.empty()) return allometry::FamilyMapping();
    return allometry::FamilyMapping::from_text(io::read_text_file(path));
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be positive");
}

std::map<std::string, std::string> read_config(const std::string& path) {
    std::map<std::string, std::string> out;
    const auto content = io::read_text_file(path);
    const auto all = text::lines(content);
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto line = all[i];
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = text::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("config '" + path + "' line " + std::to_string(i + 1) + ": expected key=value");
        }
        auto key = text::to_lower(text::trim(line.substr(0, eq)));
        for (auto& c : key) {
            if (c == '-') c = '_';
        }
        out[key] = std::string(text::trim(line.substr(eq + 1)));
    }
    return out;
}

// Config file values fill options the command line left unset.
void apply_config(AuditArgs& a, const CLI::App& sub) {
    if (a.config.empty()) return;
    const auto cfg = read_config(a.config);
    const auto unset = [&](const char* flag) { return sub.get_option(flag)->count() == 0; };
    const auto number = [&](const std::string& key) {
        auto v = text::parse_double(cfg.at(key));
        if (!v) throw ParseError("config '" + a.config + "': " + key + " is not a number");
        return *v;
    };
    const auto boolean = [&](const std::string& key) {
        const auto v = text::to_lower(cfg.at(key));
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ParseError("config '" + a.config + "': " + key + " must be true or false");
    };
    for (const auto& [key, value] : cfg) {
        if (key == "target_pixel_m") {
            if (unset("--target-pixel-m")) a.target_pixel_m = number(key);
        } else if (key == "cap_m") {
            if (unset("--cap-m")) a.cap_m = number(key);
        } else if (key == "family_map") {
            if (unset("--family-map")) a.family_map = value;
        } else if (key == "format") {
            if (value != "json" && value != "csv" && value != "both") {
                throw ParseError("config '" + a.config + "': format must be json, csv or both");
            }
            if (unset("--format")) a.format = value;
        } else if (key == "render") {
            if (unset("--render")) a.render = boolean(key);
        } else if (key == "threads") {
            if (unset("--threads")) a.threads = static_cast<int>(number(key));
        } else {
            throw ParseError("config '" + a.config + "': unknown key '" + key + "'");
        }
    }
}

int effective_threads(int requested) {
    const char* env = std::getenv(kThreadsEnv);
    if (!env) return requested;
    auto cap = text::parse_int(text::trim(env));
    if (!cap || *cap <= 0) return requested;
    if (requested <= 0 || requested > *cap) return static_cast<int>(*cap);
    return requested;
}

std::string safe_file_stem(const std::string& id) {
    std::string s = id;
    for (auto& c : s) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        if (!ok) c = '_';
    }
    return s;
}

int cmd_audit(AuditArgs a, const CLI::App& sub, std::ostream& out, std::ostream& err) {
    apply_config(a, sub);
    require_positive(a.target_pixel_m, "--target-pixel-m");
    require_positive(a.cap_m, "--cap-m");

    audit::AuditConfig config;
    config.target_pixel_m = a.target_pixel_m;
    config.cap_m = a.cap_m;
    config.max_threads = effective_threads(a.threads);
    config.include_timestamp = a.timestamp;

    const auto sites_text = io::read_text_file(a.sites);
    config.input_digests["sites"] = io::sha256_hex(sites_text);
    const auto raster_bytes = io::read_binary_file(a.raster);
    config.input_digests["raster"] = io::sha256_hex(raster_bytes);
    const auto ext = text::to_lower(fs::path(a.raster).extension().string());
    raster::GeoGrid grid = [&] {
        if (ext == ".asc") {
            return raster::parse_esri_ascii(std::string_view(reinterpret_cast<const char*>(raster_bytes.data()), raster_bytes.size()));
        }
        if (ext == ".tif" || ext == ".tiff") return raster::parse_geotiff_subset(raster_bytes);
        throw UnsupportedFormatError("raster '" + a.raster + "': unknown extension (expected .asc, .tif or .tiff)");
    }();

    allometry::FamilyMapping mapping;
    if (!a.family_map.empty()) {
        const auto map_text = io::read_text_file(a.family_map);
        config.input_digests["family_map"] = io::sha256_hex(map_text);
        mapping = allometry::FamilyMapping::from_text(map_text);
    }

    zonal::GeoJsonOptions gopt;
    gopt.allow_multipolygon = a.allow_multipolygon;
    const auto boundaries = zonal::parse_sites_geojson(sites_text, gopt);

    std::map<std::string, std::string> field_paths;
    for (const auto& spec : a.fields) {
        std::string id;
        std::string path;
        if (auto eq = spec.find('='); eq != std::string::npos) {
            id = spec.substr(0, eq);
            path = spec.substr(eq + 1);
        } else {
            path = spec;
            id = fs::path(spec).stem().string();
        }
        const bool known = std::any_of(boundaries.begin(), boundaries.end(), [&](const auto& b) { return b.site_id == id; });
        if (!known) throw Error("field file '" + path + "' does not match any site id (got '" + id + "')");
        if (field_paths.count(id)) throw Error("more than one field file for site '" + id + "'");
        field_paths[id] = path;
    }

    std::vector<audit::SiteInput> inputs;
    for (const auto& b : boundaries) {
        audit::SiteInput in;
        in.site_id = b.site_id;
        in.warnings = b.warnings;
        if (b.error) {
            in.load_error = *b.error;
            inputs.push_back(std::move(in));
            continue;
        }
        auto it = field_paths.find(b.site_id);
        if (it == field_paths.end()) {
            in.load_error = "no field measurements supplied for this site";
            inputs.push_back(std::move(in));
            continue;
        }
        const auto field_text = io::read_text_file(it->second);
        config.input_digests["field:" + b.site_id] = io::sha256_hex(field_text);
        try {
            fielddata::SiteDefinition site;
            site.site_id = b.site_id;
            site.boundary = *b.polygon;
            site.declared_area_ha = b.declared_area_ha;
            site.records = fielddata::parse_field_csv(field_text);
            in.site = std::move(site);
        } catch (const Error& e) {
            in.load_error = e.what();
        }
        inputs.push_back(std::move(in));
    }

    const auto report = audit::run_audit(inputs, grid, mapping, config);

    fs::create_directories(a.out);
    const fs::path dir(a.out);
    if (a.format == "json" || a.format == "both") {
        io::write_text_file((dir / "report.json").string(), audit::report_to_json(report));
    }
    if (a.format == "csv" || a.format == "both") {
        io::write_text_file((dir / "report.csv").string(), audit::report_to_csv(report));
        if (report.failure_count() > 0) {
            io::write_text_file((dir / "failures.csv").string(), audit::failures_to_csv(report));
        }
    }
    if (a.render) {
        for (std::size_t i = 0; i < report.sites.size(); ++i) {
            if (!report.sites[i].result) continue;
            const auto& poly = inputs[i].site->boundary;
            const auto lattice = zonal::zonal_lattice(grid, poly, a.target_pixel_m);
            io::write_text_file((dir / ("site_" + safe_file_stem(report.sites[i].site_id) + ".svg")).string(),
                                render::render_heatmap_svg(lattice, poly));
        }
    }

    for (const auto& s : report.sites) {
        if (s.result) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "site %s: ground truth %.2f t/ha, filtered %.2f t/ha, x%.1f\n",
                          s.site_id.c_str(), s.result->ground_truth_t_ha, s.result->filtered_t_ha,
                          s.result->factor_rounded);
            out << buf;
            for (const auto& w : s.result->warnings) err << "warning: site " << s.site_id << ": " << w << "\n";
        } else {
            err << "error: site " << s.site_id << ": " << s.error.value_or("?") << "\n";
        }
    }
    return report.failure_count() > 0 ? kExitPartial : kExitOk;
}

int cmd_allometry(const AllometryArgs& a, const CLI::App& sub, std::ostream& out, std::ostream& err) {
    const bool single = sub.get_option("--family")->count() > 0 || sub.get_option("--dbh")->count() > 0;
    const bool batch = !a.field.empty();
    if (single == batch) {
        err << "usage error: give either --family <class> --dbh <cm>, or --field <csv>\n";
        return kExitFatal;
    }
    if (single) {
        if (sub.get_option("--family")->count() == 0 || sub.get_option("--dbh")->count() == 0) {
            err << "usage error: --family and --dbh are both required\n";
            return kExitFatal;
        }
        const auto family = allometry::parse_family_class(a.family);
        if (!family) {
            err << "usage error: unknown family '" << a.family << "' (valid: " << family_list() << ")\n";
            return kExitFatal;
        }
        const auto agb = allometry::tree_agb(*family, a.dbh);
        if (agb.warning) err << "warning: " << *agb.warning << "\n";
        out << text::format_double(agb.agb_kg) << "\n";
        return kExitOk;
    }

    const auto mapping = load_mapping(a.family_map);
    const auto content = io::read_text_file(a.field);
    const auto records = fielddata::parse_field_csv(content);
    std::string result;
    std::size_t next = 0;
    bool header_done = false;
    for (auto line : text::lines(content)) {
        if (text::trim(line).empty()) continue;
        if (!header_done) {
            result += std::string(line) + ",agb_kg\n";
            header_done = true;
            continue;
        }
        const auto& rec = records.at(next++);
        const auto agb = allometry::tree_agb(fielddata::resolve_family(rec, mapping), rec.dbh_cm, rec.tree_id);
        if (agb.warning) err << "warning: tree " << rec.tree_id << ": " << *agb.warning << "\n";
        result += std::string(line) + "," + text::format_double(agb.agb_kg) + "\n";
    }
    if (a.out.empty()) {
        out << result;
    } else {
        io::write_text_file(a.out, result);
    }
    return kExitOk;
}

std::vector<crownmatch::CrownBox> read_crowns(const std::string& path) {
    const auto ext = text::to_lower(fs::path(path).extension().string());
    const auto content = io::read_text_file(path);
    if (text::trim(content).empty()) return {};
    if (ext == ".csv") return crownmatch::parse_crowns_csv(content);
    if (ext == ".geojson" || ext == ".json") return crownmatch::parse_crowns_geojson(content);
    throw UnsupportedFormatError("crowns '" + path + "': unknown extension (expected .csv, .geojson or .json)");
}

int cmd_match(const MatchArgs& a, std::ostream& out) {
    require_positive(a.cap_m, "--cap-m");
    const auto records = fielddata::parse_field_csv(io::read_text_file(a.field));
    const auto crowns = read_crowns(a.crowns);
    const auto match = crownmatch::match_records_to_crowns(records, crowns, a.cap_m);

    std::string matches = "tree_id,crown_id,distance_m\n";
    for (const auto& p : match.pairs) {
        matches += p.tree_id + "," + p.crown_id + "," + text::format_double(p.distance_m) + "\n";
    }
    std::string unmatched = "kind,id\n";
    for (const auto& id : match.unmatched_records) unmatched += "record," + id + "\n";
    for (const auto& id : match.unmatched_crowns) unmatched += "crown," + id + "\n";
    std::string agb_csv;
    if (a.crown_agb) {
        const auto agb = crownmatch::per_crown_agb(match, records, load_mapping(a.family_map));
        agb_csv = "crown_id,tree_id,family,agb_kg\n";
        for (const auto& c : agb) {
            agb_csv += c.crown_id + "," + c.tree_id + "," + std::string(allometry::to_string(c.family)) + "," +
                       text::format_double(c.agb_kg) + "\n";
        }
    }

    if (a.out.empty()) {
        out << matches;
        out << "# unmatched_records:";
        for (const auto& id : match.unmatched_records) out << " " << id;
        out << "\n# unmatched_crowns:";
        for (const auto& id : match.unmatched_crowns) out << " " << id;
        out << "\n";
        if (a.crown_agb) out << agb_csv;
    } else {
        fs::create_directories(a.out);
        const fs::path dir(a.out);
        io::write_text_file((dir / "matches.csv").string(), matches);
        io::write_text_file((dir / "unmatched.csv").string(), unmatched);
        if (a.crown_agb) io::write_text_file((dir / "crown_agb.csv").string(), agb_csv);
        out << match.pairs.size() << " matched, " << match.unmatched_records.size() << " records and "
            << match.unmatched_crowns.size() << " crowns unmatched\n";
    }
    return kExitOk;
}

int cmd_render(const RenderArgs& a) {
    require_positive(a.target_pixel_m, "--target-pixel-m");
    const auto grid = raster::load_raster(a.raster);
    zonal::GeoJsonOptions gopt;
    gopt.allow_multipolygon = a.allow_multipolygon;
    const auto sites = zonal::parse_sites_geojson(io::read_text_file(a.sites), gopt);
    const zonal::SiteBoundary* chosen = nullptr;
    for (const auto& s : sites) {
        if (!a.site.empty() ? s.site_id == a.site : !s.error) {
            chosen = &s;
            break;
        }
    }
    if (!chosen) throw Error(a.site.empty() ? "no valid site polygon to render" : "site '" + a.site + "' not found");
    if (chosen->error) throw Error("site '" + chosen->site_id + "': " + *chosen->error);
    std::vector<crownmatch::CrownBox> crowns;
    if (!a.crowns.empty()) crowns = read_crowns(a.crowns);
    const auto lattice = zonal::zonal_lattice(grid, *chosen->polygon, a.target_pixel_m);
    io::write_text_file(a.out, render::render_heatmap_svg(lattice, *chosen->polygon, crowns));
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Parsed p;
    auto app = build_app(p);
    std::vector<const char*> argv;
    argv.push_back("carbon-audit");
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app->parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        app->exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app->exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\nRun with --help for usage.\n";
        return kExitFatal;
    }

    try {
        if (auto* sub = app->get_subcommand("audit"); sub->parsed()) return cmd_audit(p.audit, *sub, out, err);
        if (auto* sub = app->get_subcommand("allometry"); sub->parsed()) return cmd_allometry(p.allometry, *sub, out, err);
        if (app->get_subcommand("match")->parsed()) return cmd_match(p.match, out);
        if (app->get_subcommand("render")->parsed()) return cmd_render(p.render);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    err << "usage error: no subcommand\n";
    return kExitFatal;
}

std::string help_text(const std::string& subcommand) {
    Parsed p;
    auto app = build_app(p);
    if (subcommand.empty()) return app->help();
    return app->get_subcommand(subcommand)->help();
}

std::vector<std::string> accepted_flags(const std::string& subcommand) {
    Parsed p;
    auto app = build_app(p);
    std::vector<std::string> out;
    for (const auto* opt : app->get_subcommand(subcommand)->get_options()) {
        for (const auto& name : opt->get_lnames()) out.push_back("--" + name);
    }
    return out;
}

} // namespace carbon_audit::cli
