#pragma once

/// \file synthetic.hpp
/// Seeded generator of small image/text collections with known topical
/// relevance, written in the collection directory layout of pipeline.hpp.
///
/// Each topic owns a Zipf-weighted vocabulary (word 0 is its head word) and a
/// few visual modes. Topics come in pairs whose visual modes are blended by
/// `visual_overlap`, so pixels alone confuse paired topics while text does
/// not. A document is text-noisy with probability `text_noise` (its words come
/// mostly from random topics and its head word is not guaranteed) and
/// visually noisy with probability `visual_noise` (its descriptors come from
/// a random topic). Hub documents are off-topic: their text is noisy, their
/// pixels come from a generic visual "background" and they are relevant to no
/// query. Every ordinary document shows that background in a `hub_share`
/// fraction of its descriptors, so hubs sit one hop from every topic and pull
/// long walks away from the query.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fusegraph/collection_store.hpp"
#include "fusegraph/error.hpp"
#include "fusegraph/pipeline.hpp"

namespace fusegraph::synth {

struct SynthSpec {
    std::size_t topics = 20;
    std::size_t docs_per_topic = 30;
    std::size_t queries_per_topic = 2;
    std::size_t vocabulary_per_topic = 30;
    std::size_t background_words = 40;
    std::size_t doc_length = 16;
    std::size_t query_length = 2;
    std::size_t descriptors_per_doc = 24;
    std::size_t descriptor_dim = 6;
    std::size_t visual_modes = 3;
    double text_noise = 0.35;
    double visual_noise = 0.2;
    double visual_overlap = 0.6;
    double hub_fraction = 0.0;
    double hub_share = 0.0;
    double background_rate = 0.25;
    double mode_spread = 2.5;  // std-dev of mode centers around the origin

    void validate() const {
        if (topics == 0 || docs_per_topic == 0 || queries_per_topic == 0 || vocabulary_per_topic == 0 ||
            doc_length == 0 || query_length == 0 || descriptors_per_doc == 0 || descriptor_dim == 0 ||
            visual_modes == 0) {
            fail(ErrorCode::InvalidConfig, "synthetic spec sizes must be positive");
        }
        if (query_length > vocabulary_per_topic) fail(ErrorCode::InvalidConfig, "query longer than topic vocabulary");
        for (double p : {text_noise, visual_noise, visual_overlap, hub_fraction, hub_share, background_rate}) {
            if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::InvalidConfig, "noise and overlap levels must lie in [0,1]");
        }
        if (!(mode_spread > 0.0)) fail(ErrorCode::InvalidConfig, "mode_spread must be > 0");
    }
};

/// Bundled collection: the default spec (transmedia neighbours carry signal).
inline SynthSpec bundled_spec() { return SynthSpec{}; }

/// Collection where many visually generic hub documents sit one hop from
/// every topic, so longer walks drift away from the query.
inline SynthSpec noisy_second_hop_spec() {
    SynthSpec s;
    s.hub_fraction = 0.3;
    s.hub_share = 0.3;
    return s;
}

struct SynthCollection {
    std::vector<Document> docs;
    std::vector<Query> queries;
    Qrels qrels;
};

inline SynthCollection generate(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::size_t T = spec.topics;
    auto word = [](std::size_t topic, std::size_t j) { return "t" + std::to_string(topic) + "w" + std::to_string(j); };

    std::vector<double> zipf(spec.vocabulary_per_topic);
    for (std::size_t j = 0; j < zipf.size(); ++j) zipf[j] = 1.0 / static_cast<double>(j + 1);
    std::discrete_distribution<std::size_t> zipf_pick(zipf.begin(), zipf.end());
    std::uniform_int_distribution<std::size_t> topic_pick(0, T - 1);
    std::uniform_int_distribution<std::size_t> mode_pick(0, spec.visual_modes - 1);
    std::uniform_int_distribution<std::size_t> bg_pick(0, spec.background_words ? spec.background_words - 1 : 0);

    // visual modes, blended within topic pairs; index T is the generic background
    std::vector<std::vector<std::vector<double>>> modes(T + 1);
    for (std::size_t t = 0; t <= T; ++t) {
        modes[t].resize(spec.visual_modes, std::vector<double>(spec.descriptor_dim));
        for (auto& m : modes[t]) {
            for (double& v : m) v = spec.mode_spread * normal(rng);
        }
        if (t % 2 == 1 && t < T) {
            for (std::size_t m = 0; m < spec.visual_modes; ++m) {
                for (std::size_t d = 0; d < spec.descriptor_dim; ++d) {
                    modes[t][m][d] = spec.visual_overlap * modes[t - 1][m][d] +
                                     (1.0 - spec.visual_overlap) * modes[t][m][d];
                }
            }
        }
    }

    auto descriptor = [&](std::size_t topic, std::size_t mode) {
        Descriptor d;
        d.values.resize(spec.descriptor_dim);
        for (std::size_t k = 0; k < spec.descriptor_dim; ++k) d.values[k] = modes[topic][mode][k] + normal(rng);
        // modes prefer their own horizontal band
        const double band_lo = static_cast<double>(mode % 3) / 3.0;
        const double y = unit(rng) < 0.7 ? band_lo + unit(rng) / 3.0 : unit(rng);
        d.location = std::array<double, 2>{unit(rng), std::min(y, 1.0)};
        return d;
    };

    SynthCollection out;
    std::vector<bool> is_hub;
    const std::size_t n = T * spec.docs_per_topic;
    const int width = static_cast<int>(std::to_string(n).size());
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t topic = i % T;
        Document doc;
        std::string num = std::to_string(i);
        doc.doc_id = "d" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;

        const bool hub = unit(rng) < spec.hub_fraction;
        const bool noisy_text = unit(rng) < spec.text_noise || hub;
        const bool noisy_visual = !hub && unit(rng) < spec.visual_noise;

        if (!noisy_text) doc.text_tokens.push_back(word(topic, 0));
        while (doc.text_tokens.size() < spec.doc_length) {
            if (spec.background_words > 0 && unit(rng) < spec.background_rate) {
                doc.text_tokens.push_back("bg" + std::to_string(bg_pick(rng)));
                continue;
            }
            const bool own = noisy_text ? unit(rng) < 0.1 : true;
            doc.text_tokens.push_back(word(own ? topic : topic_pick(rng), zipf_pick(rng)));
        }

        const std::size_t visual_topic = noisy_visual ? topic_pick(rng) : topic;
        for (std::size_t k = 0; k < spec.descriptors_per_doc; ++k) {
            const bool background = hub || unit(rng) < spec.hub_share;
            const std::size_t src = background ? T : visual_topic;
            doc.visual_descriptors.push_back(descriptor(src, mode_pick(rng)));
        }
        out.docs.push_back(std::move(doc));
        is_hub.push_back(hub);
    }

    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t r = 0; r < spec.queries_per_topic; ++r) {
            Query q;
            q.query_id = "q" + std::to_string(t) + "_" + std::to_string(r);
            q.text_tokens.push_back(word(t, 0));
            std::vector<std::size_t> used{0};
            while (q.text_tokens.size() < spec.query_length) {
                std::size_t j = zipf_pick(rng);
                if (std::find(used.begin(), used.end(), j) != used.end()) continue;
                used.push_back(j);
                q.text_tokens.push_back(word(t, j));
            }
            for (std::size_t k = 0; k < spec.descriptors_per_doc; ++k) {
                q.visual_descriptors.push_back(descriptor(t, k % spec.visual_modes));
            }
            for (std::size_t i = t; i < n; i += T) {
                if (!is_hub[i]) out.qrels.set(q.query_id, out.docs[i].doc_id, true);
            }
            out.queries.push_back(std::move(q));
        }
    }
    return out;
}

inline RawCollection to_raw(SynthCollection s) {
    RawCollection c;
    std::vector<std::string> ids;
    for (const auto& d : s.docs) ids.push_back(d.doc_id);
    c.table = DocTable(std::move(ids));
    c.docs = std::move(s.docs);
    c.queries = std::move(s.queries);
    c.qrels = std::move(s.qrels);
    return c;
}

/// Writes docs, queries, qrels and both descriptor files into `dir`.
inline void write_collection(const SynthCollection& s, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::pair<std::string, std::vector<std::string>>> docs, queries;
    std::vector<std::pair<std::string, std::vector<Descriptor>>> ddesc, qdesc;
    for (const auto& d : s.docs) {
        docs.emplace_back(d.doc_id, d.text_tokens);
        ddesc.emplace_back(d.doc_id, d.visual_descriptors);
    }
    for (const auto& q : s.queries) {
        queries.emplace_back(q.query_id, q.text_tokens);
        qdesc.emplace_back(q.query_id, q.visual_descriptors);
    }
    save_token_file(docs, (dir / files::docs).string());
    save_token_file(queries, (dir / files::queries).string());
    save_descriptors(ddesc, (dir / files::descriptors).string());
    save_descriptors(qdesc, (dir / files::query_descriptors).string());
    save_qrels(s.qrels, (dir / files::qrels).string());
}

inline void make_synthetic(const SynthSpec& spec, std::uint64_t seed, const std::filesystem::path& dir) {
    write_collection(generate(spec, seed), dir);
}

}  // namespace fusegraph::synth
