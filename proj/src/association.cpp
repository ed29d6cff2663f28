#include "pmbm/association.hpp"

#include "pmbm/errors.hpp"

#include <algorithm>
#include <string>

namespace pmbm {

void for_each_partition(int m, const std::function<void(const std::vector<Cell>&)>& visit) {
    if (m == 0) {
        visit({});
        return;
    }
    std::vector<int> block(static_cast<std::size_t>(m), 0);
    std::vector<Cell> cells;
    auto recurse = [&](auto&& self, int j, int used) -> void {
        if (j == m) {
            cells.assign(static_cast<std::size_t>(used), Cell{});
            for (int i = 0; i < m; ++i) cells[static_cast<std::size_t>(block[static_cast<std::size_t>(i)])].push_back(i);
            visit(cells);
            return;
        }
        for (int b = 0; b <= used; ++b) {
            block[static_cast<std::size_t>(j)] = b;
            self(self, j + 1, b == used ? used + 1 : used);
        }
    };
    recurse(recurse, 0, 0);
}

namespace {

class Enumerator {
public:
    Enumerator(const AssociationSpace& s, std::uint64_t limit) : s_(s), limit_(limit) {
        current_.slot_cells.assign(static_cast<std::size_t>(s.slots), Cell{});
        current_.tree_cells.assign(static_cast<std::size_t>(s.trees), Cell{});
    }

    // Label each cell of a fixed partition.
    void label_cells(const std::vector<Cell>& cells, std::size_t c) {
        if (c == cells.size()) {
            emit();
            return;
        }
        const Cell& cell = cells[c];
        for (int s = 0; s < s_.slots; ++s) {
            auto& slot = current_.slot_cells[static_cast<std::size_t>(s)];
            if (!slot.empty()) continue;
            slot = cell;
            label_cells(cells, c + 1);
            slot.clear();
        }
        const bool target_ok = !s_.singleton_targets || cell.size() == 1;
        if (!target_ok) return;
        for (int t = 0; t < s_.trees; ++t) {
            auto& tc = current_.tree_cells[static_cast<std::size_t>(t)];
            if (!tc.empty() || !s_.tree_allowed(t, cell)) continue;
            tc = cell;
            label_cells(cells, c + 1);
            tc.clear();
        }
        if (s_.new_allowed(cell)) {
            current_.new_cells.push_back(cell);
            label_cells(cells, c + 1);
            current_.new_cells.pop_back();
        }
    }

    // Point targets: label each measurement, slots collect any number of measurements.
    void label_measurements(int j) {
        if (j == s_.measurements) {
            emit();
            return;
        }
        const Cell single{j};
        for (int s = 0; s < s_.slots; ++s) {
            auto& slot = current_.slot_cells[static_cast<std::size_t>(s)];
            slot.push_back(j);
            label_measurements(j + 1);
            slot.pop_back();
        }
        for (int t = 0; t < s_.trees; ++t) {
            auto& tc = current_.tree_cells[static_cast<std::size_t>(t)];
            if (!tc.empty() || !s_.tree_allowed(t, single)) continue;
            tc = single;
            label_measurements(j + 1);
            tc.clear();
        }
        if (s_.new_allowed(single)) {
            current_.new_cells.push_back(single);
            label_measurements(j + 1);
            current_.new_cells.pop_back();
        }
    }

    std::vector<Association> take() { return std::move(out_); }

private:
    void emit() {
        if (out_.size() >= limit_)
            throw SizeError("association enumeration exceeds " + std::to_string(limit_) + " hypotheses");
        Association a = current_;
        std::sort(a.new_cells.begin(), a.new_cells.end());
        out_.push_back(std::move(a));
    }

    const AssociationSpace& s_;
    std::uint64_t limit_;
    Association current_;
    std::vector<Association> out_;
};

}  // namespace

std::vector<Association> enumerate_labelled(const AssociationSpace& space, std::uint64_t limit) {
    Enumerator e(space, limit);
    if (space.singleton_targets) {
        e.label_measurements(0);
    } else {
        for_each_partition(space.measurements, [&](const std::vector<Cell>& cells) { e.label_cells(cells, 0); });
    }
    return e.take();
}

}  // namespace pmbm
