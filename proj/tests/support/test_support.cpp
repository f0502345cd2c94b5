#include "test_support.hpp"

#include <cstdio>
#include <cstdlib>

#include <sys/wait.h>
#include <unistd.h>

#include "effstack/effects.hpp"

namespace effstack::testing {

namespace {

struct ReadFile {
    static constexpr EffectId id = 0;
    static constexpr const char* name = "read_file";
    struct Payload {
        const char* filename;
    };
    using Reply = const char*;
};

void* read_print_entry(void* arg) {
    const char* text = perform<ReadFile>({"example.txt"});
    *static_cast<std::string*>(arg) = text;
    return nullptr;
}

} // namespace

std::string run_read_file_tutorial(StackStrategy& strategy) {
    debug_reset_effect_registry();
    std::string received;
    auto k = Coroutine::create_with(strategy, read_print_entry, &received,
                                    strategy.default_frame_size());
    Request request = resume(*k, 0, handles(ReadFile::id));
    while (!request.is_return()) {
        if (request.effect == ReadFile::id) {
            const char* filename = payload_of<ReadFile>(request).filename;
            if (std::string(filename) != "example.txt")
                return "<wrong filename: " + std::string(filename) + ">";
            request = resume(*k, to_word(kTutorialText), handles(ReadFile::id));
        } else {
            return "<unexpected effect>";
        }
    }
    return received;
}

ChildResult run_in_child(const std::function<void()>& body) {
    int pipefd[2];
    if (pipe(pipefd) != 0) {
        std::perror("pipe");
        std::abort();
    }
    fflush(nullptr);
    pid_t pid = fork();
    if (pid < 0) {
        std::perror("fork");
        std::abort();
    }
    if (pid == 0) {
        close(pipefd[0]);
        dup2(pipefd[1], STDERR_FILENO);
        close(pipefd[1]);
        body();
        _exit(0);
    }
    close(pipefd[1]);
    std::string output;
    char buf[4096];
    ssize_t n;
    while ((n = read(pipefd[0], buf, sizeof(buf))) > 0)
        output.append(buf, static_cast<std::size_t>(n));
    close(pipefd[0]);

    int status = 0;
    waitpid(pid, &status, 0);

    ChildResult result;
    result.exited = WIFEXITED(status);
    result.exit_code = result.exited ? WEXITSTATUS(status) : -1;
    result.term_signal = WIFSIGNALED(status) ? WTERMSIG(status) : 0;
    result.stderr_output = std::move(output);
    return result;
}

} // namespace effstack::testing
