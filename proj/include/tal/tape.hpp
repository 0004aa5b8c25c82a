#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "tal/seq_tensor.hpp"

namespace tal {

// Reverse-mode tape over SeqTensor-valued ops. A forward op pushes its output
// together with a closure that routes gradients to its inputs (earlier tape
// nodes and/or external parameter gradient buffers); backward() replays the
// closures newest-first. One training step owns one tape; closures refer to
// nodes by id so the tape may reallocate while recording.
class GradTape {
public:
    int leaf(SeqTensor value) { return push(std::move(value), nullptr); }

    int push(SeqTensor value, std::function<void(GradTape&)> back) {
        Node n;
        n.grad = SeqTensor(value.len(), value.channels(), 0.0);
        n.value = std::move(value);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    const SeqTensor& value(int id) const { return nodes_[id].value; }
    SeqTensor& grad(int id) { return nodes_[id].grad; }

    // Caller seeds the gradients of the output nodes first.
    void backward() {
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            if (nodes_[i].back) nodes_[i].back(*this);
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        SeqTensor value;
        SeqTensor grad;
        std::function<void(GradTape&)> back;
    };
    std::vector<Node> nodes_;
};

} // namespace tal
