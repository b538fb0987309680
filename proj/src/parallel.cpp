#include "miovs/parallel.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace miovs {

namespace {

std::size_t read_worker_count() {
    if (const char* env = std::getenv("MIOVS_THREADS")) {
        const long v = std::atol(env);
        if (v >= 1) return std::min<std::size_t>(static_cast<std::size_t>(v), 8);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return std::min<std::size_t>(std::max(1u, hw), 8);
}

// One persistent pool; workers sleep between jobs. A job is a (fn, n, chunks)
// triple; workers grab chunk indices and call fn on their range.
class Pool {
public:
    Pool(std::size_t workers) : workers_(workers) {
        for (std::size_t i = 0; i + 1 < workers_; ++i) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void run(std::size_t n,
             const std::function<void(std::size_t, std::size_t)>& fn) {
        if (n == 0) return;
        const std::size_t chunks = std::min(workers_, n);
        if (chunks <= 1) {
            fn(0, n);
            return;
        }
        // one job at a time; concurrent callers take turns
        std::lock_guard<std::mutex> run_lock(run_mu_);
        {
            std::lock_guard<std::mutex> lock(mu_);
            fn_ = &fn;
            n_ = n;
            chunks_ = chunks;
            next_chunk_ = 0;
            pending_ = chunks;
            ++generation_;
        }
        cv_.notify_all();
        work();  // caller participates
        std::unique_lock<std::mutex> lock(mu_);
        done_cv_.wait(lock, [this] { return pending_ == 0; });
        fn_ = nullptr;
    }

private:
    void worker_loop() {
        std::uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lock(mu_);
                cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            work();
        }
    }

    void work() {
        for (;;) {
            std::size_t c;
            {
                std::lock_guard<std::mutex> lock(mu_);
                if (next_chunk_ >= chunks_) return;
                c = next_chunk_++;
            }
            const std::size_t per = n_ / chunks_;
            const std::size_t extra = n_ % chunks_;
            const std::size_t begin = c * per + std::min(c, extra);
            const std::size_t end = begin + per + (c < extra ? 1 : 0);
            (*fn_)(begin, end);
            std::lock_guard<std::mutex> lock(mu_);
            if (--pending_ == 0) done_cv_.notify_all();
        }
    }

    std::size_t workers_;
    std::vector<std::thread> threads_;
    std::mutex run_mu_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    const std::function<void(std::size_t, std::size_t)>* fn_ = nullptr;
    std::size_t n_ = 0;
    std::size_t chunks_ = 0;
    std::size_t next_chunk_ = 0;
    std::size_t pending_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

}  // namespace

std::size_t worker_count() {
    static const std::size_t n = read_worker_count();
    return n;
}

void parallel_rows(std::size_t n,
                   const std::function<void(std::size_t, std::size_t)>& fn) {
    static Pool pool(worker_count());
    pool.run(n, fn);
}

}  // namespace miovs
