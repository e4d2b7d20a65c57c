#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "overton/dataset.hpp"
#include "overton/error.hpp"

namespace overton {

/// Sparse participants x statements matrix of ternary votes for one
/// question. Unvoted cells stay missing; nothing is imputed.
class VoteMatrix {
public:
    static constexpr std::int8_t kMissing = INT8_MIN;

    VoteMatrix() = default;

    /// Rows are given as optional votes in {-1, 0, +1}; nullopt marks missing.
    VoteMatrix(std::string question_id, std::vector<std::string> row_ids,
               std::vector<std::string> column_ids,
               const std::vector<std::vector<std::optional<int>>>& rows)
        : question_id_(std::move(question_id)),
          row_ids_(std::move(row_ids)),
          column_ids_(std::move(column_ids)) {
        if (rows.size() != row_ids_.size()) throw Error("vote matrix: row id count mismatch");
        if (column_ids_.empty()) throw DataError(DataError::Kind::empty_matrix, "vote matrix has no columns");
        cells_.reserve(rows.size() * column_ids_.size());
        answered_.reserve(rows.size());
        for (const auto& row : rows) {
            if (row.size() != column_ids_.size()) throw Error("vote matrix: ragged row");
            std::size_t n = 0;
            for (const auto& v : row) {
                if (v && (*v < -1 || *v > 1)) throw Error("vote matrix: value outside {-1,0,1}");
                cells_.push_back(v ? static_cast<std::int8_t>(*v) : kMissing);
                n += v.has_value();
            }
            answered_.push_back(n);
        }
    }

    const std::string& question_id() const { return question_id_; }
    std::size_t rows() const { return row_ids_.size(); }
    /// d: total statement count for the question.
    std::size_t cols() const { return column_ids_.size(); }
    const std::vector<std::string>& row_ids() const { return row_ids_; }
    const std::vector<std::string>& column_ids() const { return column_ids_; }

    std::int8_t at(std::size_t r, std::size_t c) const { return cells_[r * cols() + c]; }
    bool voted(std::size_t r, std::size_t c) const { return at(r, c) != kMissing; }
    /// d_i: number of non-missing entries in row r.
    std::size_t answered(std::size_t r) const { return answered_[r]; }
    const std::int8_t* row(std::size_t r) const { return cells_.data() + r * cols(); }

    std::optional<int> value(std::size_t r, std::size_t c) const {
        return voted(r, c) ? std::optional<int>(at(r, c)) : std::nullopt;
    }

private:
    std::string question_id_;
    std::vector<std::string> row_ids_;
    std::vector<std::string> column_ids_;
    std::vector<std::int8_t> cells_;
    std::vector<std::size_t> answered_;
};

/// Rows: participants with at least one vote on the question's statements
/// (sorted by id). Columns: the question's statements (sorted by id).
inline VoteMatrix build_vote_matrix(const Dataset& ds, const std::string& question_id) {
    if (!ds.find_question(question_id))
        throw DataError(DataError::Kind::integrity, "unknown question id '" + question_id + "'");
    const auto statements = ds.statements_for(question_id);
    const auto votes = ds.votes_for(question_id);
    if (statements.empty() || votes.empty())
        throw DataError(DataError::Kind::empty_matrix,
                        "question " + question_id + " has no votes to build a matrix from");

    std::map<std::string, std::size_t> column;
    std::vector<std::string> column_ids;
    for (const auto* s : statements) {
        column.emplace(s->id, column_ids.size());
        column_ids.push_back(s->id);
    }
    std::map<std::string, std::vector<std::optional<int>>> by_voter;
    for (const auto* v : votes) {
        auto& row = by_voter[v->voter_id];
        if (row.empty()) row.resize(column_ids.size());
        auto& cell = row[column.at(v->statement_id)];
        if (cell)
            throw DataError(DataError::Kind::integrity, "duplicate vote by " + v->voter_id +
                                                            " on statement " + v->statement_id);
        cell = static_cast<int>(v->value);
    }
    std::vector<std::string> row_ids;
    std::vector<std::vector<std::optional<int>>> rows;
    for (auto& [id, row] : by_voter) {
        row_ids.push_back(id);
        rows.push_back(std::move(row));
    }
    return VoteMatrix(question_id, std::move(row_ids), std::move(column_ids), rows);
}

}  // namespace overton
