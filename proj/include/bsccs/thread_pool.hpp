#pragma once

#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace bsccs {

/// Fixed-size worker pool for fork-join loops.  run() hands out
/// `num_tasks` indexed tasks and blocks until every one has finished; the
/// calling thread participates, so a pool with zero workers still makes
/// progress.  Task scheduling is work-stealing over a shared counter, so
/// which thread runs which index is not deterministic; callers that need
/// reproducible numbers must make the tasks write to disjoint slots and do
/// any order-sensitive combining themselves.
///
/// run() is serialized: concurrent calls from different threads queue up.
/// Calling run() from inside a task deadlocks; don't nest.
class ThreadPool {
public:
    explicit ThreadPool(int workers = 0) {
        for (int w = 0; w < workers; ++w) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) {
            t.join();
        }
    }

    int worker_count() const { return static_cast<int>(threads_.size()); }

    void run(int num_tasks, const std::function<void(int)>& task) {
        if (num_tasks <= 0) {
            return;
        }
        if (threads_.empty() || num_tasks == 1) {
            for (int i = 0; i < num_tasks; ++i) {
                task(i);
            }
            return;
        }
        std::lock_guard<std::mutex> outer(run_mu_);
        std::exception_ptr err;
        {
            std::unique_lock<std::mutex> lk(mu_);
            task_ = &task;
            next_ = 0;
            total_ = num_tasks;
            pending_ = num_tasks;
            error_ = nullptr;
            cv_.notify_all();
            drain(lk);
            done_cv_.wait(lk, [&] { return pending_ == 0; });
            task_ = nullptr;
            err = error_;
            error_ = nullptr;
        }
        if (err) {
            std::rethrow_exception(err);
        }
    }

private:
    // Pulls tasks until the current batch is exhausted.  `lk` is held on
    // entry and exit, released around each task body.
    void drain(std::unique_lock<std::mutex>& lk) {
        while (task_ != nullptr && next_ < total_) {
            const int index = next_++;
            const auto* t = task_;
            lk.unlock();
            std::exception_ptr caught;
            try {
                (*t)(index);
            } catch (...) {
                caught = std::current_exception();
            }
            lk.lock();
            if (caught && !error_) {
                error_ = caught;
            }
            if (--pending_ == 0) {
                done_cv_.notify_all();
            }
        }
    }

    void worker_loop() {
        std::unique_lock<std::mutex> lk(mu_);
        for (;;) {
            cv_.wait(lk, [&] { return stop_ || (task_ != nullptr && next_ < total_); });
            if (stop_) {
                return;
            }
            drain(lk);
        }
    }

    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::mutex run_mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    const std::function<void(int)>* task_ = nullptr;
    int next_ = 0;
    int total_ = 0;
    int pending_ = 0;
    std::exception_ptr error_;
    bool stop_ = false;
};

} // namespace bsccs
