#ifndef OPTILOG_JSON_IO_HPP
#define OPTILOG_JSON_IO_HPP

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "config_search.hpp"
#include "latency.hpp"
#include "misbehavior.hpp"
#include "suspicion.hpp"
#include "tree_candidates.hpp"

namespace optilog {

using json = nlohmann::json;

class JsonFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace jsonio {

inline const json& field(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key))
        throw JsonFormatError(std::string("missing field '") + key + "'");
    return j.at(key);
}

inline std::uint64_t uint_field(const json& j, const char* key)
{
    const json& v = field(j, key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw JsonFormatError(std::string("field '") + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

inline ReplicaId replica(const json& v)
{
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::int64_t>() > 0xFFFFFFFFLL)
        throw JsonFormatError("replica id must be a non-negative integer");
    return rid(v.get<std::uint32_t>());
}

inline ReplicaId replica_field(const json& j, const char* key) { return replica(field(j, key)); }

inline json micros(Micros v) { return is_infinite(v) ? json("inf") : json(v); }

inline Micros micros_from(const json& v)
{
    if (v.is_string() && v.get<std::string>() == "inf")
        return kInfinite;
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw JsonFormatError("latency must be a non-negative integer or \"inf\"");
    return v.get<Micros>();
}

inline json ids(const auto& range)
{
    json a = json::array();
    for (ReplicaId r : range)
        a.push_back(idx(r));
    return a;
}

inline std::vector<ReplicaId> ids_from(const json& v)
{
    if (!v.is_array())
        throw JsonFormatError("expected an array of replica ids");
    std::vector<ReplicaId> out;
    for (const auto& x : v)
        out.push_back(replica(x));
    return out;
}

} // namespace jsonio

inline json to_json(const LatencyVector& v)
{
    json entries = json::array();
    for (Micros e : v.entries)
        entries.push_back(jsonio::micros(e));
    return {{"author", idx(v.author)}, {"entries", entries}};
}

inline LatencyVector latency_vector_from_json(const json& j)
{
    LatencyVector v;
    v.author = jsonio::replica_field(j, "author");
    const json& e = jsonio::field(j, "entries");
    if (!e.is_array())
        throw JsonFormatError("entries must be an array");
    for (const auto& x : e)
        v.entries.push_back(jsonio::micros_from(x));
    return v;
}

inline json to_json(const Suspicion& s)
{
    return {{"kind", to_string(s.kind)},
            {"accuser", idx(s.accuser)},
            {"accused", idx(s.accused)},
            {"round", s.round},
            {"message_type", to_string(s.message_type)}};
}

inline Suspicion suspicion_from_json(const json& j)
{
    Suspicion s;
    const std::string kind = jsonio::field(j, "kind").get<std::string>();
    if (kind == "slow")
        s.kind = SuspicionKind::Slow;
    else if (kind == "false")
        s.kind = SuspicionKind::False;
    else
        throw JsonFormatError("unknown suspicion kind '" + kind + "'");
    s.accuser = jsonio::replica_field(j, "accuser");
    s.accused = jsonio::replica_field(j, "accused");
    s.round = jsonio::uint_field(j, "round");
    const auto t = message_type_from(jsonio::field(j, "message_type").get<std::string>());
    if (!t)
        throw JsonFormatError("unknown message_type");
    s.message_type = *t;
    return s;
}

// One line of the suspicion dump.
inline json suspicion_record(const Suspicion& s, View view)
{
    json j = to_json(s);
    j["view"] = view;
    return j;
}

inline json to_json(const Complaint& c)
{
    return {{"accuser", idx(c.accuser)},
            {"accused", idx(c.accused)},
            {"kind", to_string(c.kind)},
            {"evidence", {{"blob", c.evidence.blob}, {"valid", c.evidence.valid}}}};
}

inline Complaint complaint_from_json(const json& j)
{
    Complaint c;
    c.accuser = jsonio::replica_field(j, "accuser");
    c.accused = jsonio::replica_field(j, "accused");
    const auto k = complaint_kind_from(jsonio::field(j, "kind").get<std::string>());
    if (!k)
        throw JsonFormatError("unknown complaint kind");
    c.kind = *k;
    const json& e = jsonio::field(j, "evidence");
    c.evidence.blob = jsonio::field(e, "blob").get<std::string>();
    c.evidence.valid = jsonio::field(e, "valid").get<bool>();
    return c;
}

inline json to_json(const TreeConfig& t)
{
    json inter = json::array();
    for (std::size_t i = 0; i < t.intermediates.size(); ++i)
        inter.push_back({{"id", idx(t.intermediates[i])}, {"children", jsonio::ids(t.children[i])}});
    return {{"root", idx(t.root)}, {"intermediates", inter}};
}

inline json to_json(const Configuration& c)
{
    if (const auto* s = std::get_if<StarConfig>(&c))
        return {{"topology", "star"}, {"leader", idx(s->leader)}, {"n", s->n}};
    json j = to_json(std::get<TreeConfig>(c));
    j["topology"] = "tree";
    return j;
}

inline TreeConfig tree_from_json(const json& j)
{
    TreeConfig t;
    t.root = jsonio::replica_field(j, "root");
    const json& inter = jsonio::field(j, "intermediates");
    if (!inter.is_array())
        throw JsonFormatError("intermediates must be an array");
    for (const auto& i : inter) {
        t.intermediates.push_back(jsonio::replica_field(i, "id"));
        t.children.push_back(jsonio::ids_from(jsonio::field(i, "children")));
    }
    t.branch_factor = static_cast<std::uint32_t>(t.intermediates.size());
    return t;
}

inline Configuration configuration_from_json(const json& j)
{
    const std::string topo = jsonio::field(j, "topology").get<std::string>();
    if (topo == "star")
        return StarConfig{jsonio::replica_field(j, "leader"), static_cast<std::uint32_t>(jsonio::uint_field(j, "n"))};
    if (topo == "tree")
        return tree_from_json(j);
    throw JsonFormatError("unknown topology '" + topo + "'");
}

inline json to_json(const ConfigProposal& p)
{
    return {{"author", idx(p.author)},
            {"config", to_json(p.config)},
            {"claimed_score", jsonio::micros(p.claimed_score)},
            {"basis", {{"matrix_generation", p.basis.matrix_generation},
                       {"candidate_version", p.basis.candidate_version}}}};
}

inline ConfigProposal proposal_from_json(const json& j)
{
    ConfigProposal p;
    p.author = jsonio::replica_field(j, "author");
    p.config = configuration_from_json(jsonio::field(j, "config"));
    p.claimed_score = jsonio::micros_from(jsonio::field(j, "claimed_score"));
    const json& b = jsonio::field(j, "basis");
    p.basis.matrix_generation = jsonio::uint_field(b, "matrix_generation");
    p.basis.candidate_version = jsonio::uint_field(b, "candidate_version");
    return p;
}

inline json to_json(const TimeoutTable& t)
{
    json entries = json::array();
    for (const auto& [k, d] : t.d_m)
        entries.push_back({{"message_type", to_string(k.type)},
                           {"recipient", idx(k.recipient)},
                           {"sender", idx(k.sender)},
                           {"d", jsonio::micros(d)}});
    return {{"round_duration", jsonio::micros(t.round_duration)}, {"d_m", entries}};
}

inline json state_dump(const TreeSuspicionState& s)
{
    json edges = json::array();
    for (const auto& [a, b] : s.base().edges())
        edges.push_back({idx(a), idx(b)});
    json mg = json::array();
    for (const auto& [a, b] : s.mg())
        mg.push_back({idx(a), idx(b)});
    const CandidateSet c = tree_candidates(s);
    return {{"edges", edges},
            {"mg", mg},
            {"t", jsonio::ids(s.t_set())},
            {"crash", jsonio::ids(s.base().crash_set())},
            {"candidates", jsonio::ids(c.candidates)},
            {"u", c.u}};
}

} // namespace optilog

#endif
