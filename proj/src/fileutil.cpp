#include "ufatd/fileutil.hpp"

#include <fstream>
#include <iterator>
#include <system_error>

#include "ufatd/error.hpp"

namespace ufatd {

namespace {

template <typename Bytes>
void write_then_rename(const std::filesystem::path& path, const Bytes& contents) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(contents.data()), static_cast<std::streamsize>(contents.size()));
        if (!out) fail(ErrorKind::Io, "write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace

void atomic_write(const std::filesystem::path& path, const std::string& contents) {
    write_then_rename(path, contents);
}

void atomic_write(const std::filesystem::path& path, const std::vector<std::uint8_t>& contents) {
    write_then_rename(path, contents);
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace ufatd
