#include "sumctx/tokenizer.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <csignal>
#include <cstring>

#include "sumctx/text_util.hpp"

namespace sumctx {

// Child process speaking the one-request-per-line protocol.
struct Tokenizer::Process {
    pid_t pid = -1;
    int to_child = -1;   // our write end
    int from_child = -1; // our read end
    std::string buffer;  // unread bytes from the child

    ~Process() {
        if (to_child >= 0) ::close(to_child);
        if (from_child >= 0) ::close(from_child);
        if (pid > 0) {
            ::kill(pid, SIGTERM);
            int status = 0;
            ::waitpid(pid, &status, 0);
        }
    }
};

namespace {

std::unique_ptr<Tokenizer::Process> spawn_process(const std::string& command) {
    std::array<int, 2> in_pipe{-1, -1};  // parent -> child
    std::array<int, 2> out_pipe{-1, -1}; // child -> parent
    if (::pipe(in_pipe.data()) != 0)
        throw TokenizerError("failed to create pipe: " + std::string(std::strerror(errno)));
    if (::pipe(out_pipe.data()) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw TokenizerError("failed to create pipe: " + std::string(std::strerror(errno)));
    }

    const pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
        throw TokenizerError("failed to fork tokenizer process");
    }
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }

    auto process = std::make_unique<Tokenizer::Process>();
    process->pid = pid;
    process->to_child = in_pipe[1];
    process->from_child = out_pipe[0];
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    return process;
}

std::string escape_line(std::string_view text) {
    std::string out;
    out.reserve(text.size() + 8);
    for (char c : text) {
        if (c == '\\')
            out += "\\\\";
        else if (c == '\n')
            out += "\\n";
        else
            out += c;
    }
    return out;
}

bool write_all(int fd, std::string_view data) {
    std::size_t written = 0;
    while (written < data.size()) {
        const ssize_t n = ::write(fd, data.data() + written, data.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        written += static_cast<std::size_t>(n);
    }
    return true;
}

} // namespace

Tokenizer::Tokenizer(TokenizerSpec spec) : spec_(std::move(spec)) {
    if (spec_.id.empty())
        throw ArgumentError("tokenizer spec has empty id");
    if (spec_.kind == TokenizerKind::External && spec_.command.empty())
        throw ArgumentError("external tokenizer spec has empty command");
}

Tokenizer::~Tokenizer() = default;

int Tokenizer::count(std::string_view text) const {
    if (spec_.kind == TokenizerKind::Whitespace) {
        int tokens = 0;
        bool in_run = false;
        for (char c : text) {
            const bool space = is_ascii_space(c);
            if (!space && !in_run) ++tokens;
            in_run = !space;
        }
        return tokens;
    }
    return count_external(text);
}

int Tokenizer::count_external(std::string_view text) const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!process_) process_ = spawn_process(spec_.command);

    const std::string request = escape_line(text) + "\n";
    if (!write_all(process_->to_child, request)) {
        process_.reset();
        throw TokenizerError("external tokenizer \"" + spec_.id + "\" is not accepting input");
    }

    // Read one reply line.
    std::string& buf = process_->buffer;
    std::size_t newline;
    while ((newline = buf.find('\n')) == std::string::npos) {
        char chunk[256];
        const ssize_t n = ::read(process_->from_child, chunk, sizeof(chunk));
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            process_.reset();
            throw TokenizerError("external tokenizer \"" + spec_.id + "\" closed its output");
        }
        buf.append(chunk, static_cast<std::size_t>(n));
    }
    std::string reply = buf.substr(0, newline);
    buf.erase(0, newline + 1);
    if (!reply.empty() && reply.back() == '\r') reply.pop_back();

    const std::string_view trimmed = trim(reply);
    if (trimmed.empty())
        throw TokenizerError("external tokenizer \"" + spec_.id + "\" returned an empty reply");
    int value = 0;
    for (char c : trimmed) {
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw TokenizerError("external tokenizer \"" + spec_.id +
                                 "\" returned a non-numeric count: \"" + reply + "\"");
        value = value * 10 + (c - '0');
    }
    return value;
}

std::shared_ptr<Tokenizer> make_tokenizer(const TokenizerSpec& spec) {
    return std::make_shared<Tokenizer>(spec);
}

void SegmentMarkers::validate() const {
    const std::array<const std::string*, 5> all = {&persona, &summary, &sp1, &sp2, &request};
    for (const std::string* m : all)
        if (m->empty()) throw ArgumentError("segment markers must be non-empty");
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            if (*all[i] == *all[j])
                throw ArgumentError("segment markers must be pairwise distinct (\"" + *all[i] +
                                    "\" repeats)");
}

std::vector<MarkerCollision> validate_markers(const SegmentMarkers& markers,
                                              std::span<const Dialogue> corpus) {
    markers.validate();
    const std::array<const std::string*, 5> all = {&markers.persona, &markers.summary,
                                                   &markers.sp1, &markers.sp2, &markers.request};
    std::vector<MarkerCollision> collisions;
    for (const Dialogue& d : corpus)
        for (const Turn& t : d.turns)
            for (const std::string* m : all)
                if (t.text.find(*m) != std::string::npos) {
                    collisions.push_back(MarkerCollision{d.id, t.index});
                    break;
                }
    return collisions;
}

} // namespace sumctx
