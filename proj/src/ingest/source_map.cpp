#include <charconv>

#include "nftguard/errors.hpp"
#include "nftguard/ingest.hpp"

namespace nftguard::ingest {

namespace {

std::int64_t parse_int(std::string_view field) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw MalformedSourceMap("non-integer source map field '" + std::string(field) + "'");
    return value;
}

JumpKind parse_jump(std::string_view field) {
    if (field == "i") return JumpKind::IntoFunction;
    if (field == "o") return JumpKind::OutOfFunction;
    if (field == "-") return JumpKind::Regular;
    throw MalformedSourceMap("bad jump kind '" + std::string(field) + "'");
}

}  // namespace

std::vector<SourceMapEntry> decode_source_map(std::string_view raw, std::size_t instruction_count) {
    std::vector<SourceMapEntry> out;
    if (!raw.empty()) {
        if (raw.back() == ';') raw.remove_suffix(1);
        SourceMapEntry prev;
        std::size_t pos = 0;
        while (true) {
            auto end = raw.find(';', pos);
            auto item = raw.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
            SourceMapEntry cur = prev;
            std::size_t field_pos = 0;
            for (int field = 0; field_pos <= item.size(); ++field) {
                auto colon = item.find(':', field_pos);
                auto text = item.substr(field_pos, colon == std::string_view::npos ? std::string_view::npos
                                                                                   : colon - field_pos);
                if (!text.empty()) {
                    switch (field) {
                        case 0: cur.offset = parse_int(text); break;
                        case 1: cur.length = parse_int(text); break;
                        case 2: cur.file_index = static_cast<int>(parse_int(text)); break;
                        case 3: cur.jump = parse_jump(text); break;
                        case 4: cur.modifier_depth = static_cast<int>(parse_int(text)); break;
                        default: throw MalformedSourceMap("too many source map fields");
                    }
                }
                if (colon == std::string_view::npos) break;
                field_pos = colon + 1;
            }
            out.push_back(cur);
            prev = cur;
            if (end == std::string_view::npos) break;
            pos = end + 1;
        }
    }
    if (out.size() != instruction_count)
        throw MalformedSourceMap("source map has " + std::to_string(out.size()) + " entries, expected " +
                                 std::to_string(instruction_count));
    return out;
}

}  // namespace nftguard::ingest
