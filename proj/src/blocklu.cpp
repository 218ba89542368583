#include "spdc/blocklu.hpp"

#include <algorithm>

#include "spdc/error.hpp"

namespace spdc {

std::string to_string(MsgKind k) {
  switch (k) {
    case MsgKind::assign_row: return "ASSIGN_ROW";
    case MsgKind::u_blocks: return "U_BLOCKS";
    case MsgKind::result: return "RESULT";
  }
  return "?";
}

std::string block_label(char type, std::size_t i, std::size_t j) {
  std::string out(1, type);
  out += '_';
  if (i < 10 && j < 10) {
    out += std::to_string(i);
    out += std::to_string(j);
  } else {
    out += std::to_string(i);
    out += ',';
    out += std::to_string(j);
  }
  return out;
}

std::pair<std::size_t, std::size_t> block_indices(const std::string& label) {
  const auto us = label.find('_');
  if (us == std::string::npos || us + 2 > label.size())
    throw ProtocolViolation("malformed block label \"" + label + "\"");
  const std::string body = label.substr(us + 1);
  const auto comma = body.find(',');
  if (comma != std::string::npos)
    return {std::stoul(body.substr(0, comma)), std::stoul(body.substr(comma + 1))};
  if (body.size() != 2) throw ProtocolViolation("malformed block label \"" + label + "\"");
  return {std::stoul(body.substr(0, 1)), std::stoul(body.substr(1))};
}

namespace {

LabeledBlock labeled(char type, std::size_t i, std::size_t j, Matrix m) {
  return LabeledBlock{block_label(type, i, j), std::move(m)};
}

}  // namespace

ServerMessage make_message(int from, int to, MsgKind kind, std::vector<LabeledBlock> blocks) {
  ServerMessage msg;
  msg.from = from;
  msg.to = to;
  msg.kind = kind;
  msg.blocks = std::move(blocks);
  msg.size = 0;
  for (const auto& b : msg.blocks) msg.size += b.m.rows() * b.m.cols();
  return msg;
}

LuPair factor_diag(const Matrix& x_ii, std::uint64_t* flops) { return lu_plain(x_ii, flops); }

Matrix compute_l_block(const Matrix& x_ik, const Matrix* prior, const Matrix& u_kk,
                       std::uint64_t* flops) {
  const Matrix rhs = prior ? subtract(x_ik, *prior, flops) : x_ik;
  return solve_upper_right(rhs, u_kk, flops);
}

Matrix compute_u_block(const Matrix& x_ij, const Matrix* prior, const Matrix& l_ii,
                       std::uint64_t* flops) {
  const Matrix rhs = prior ? subtract(x_ij, *prior, flops) : x_ij;
  return solve_unit_lower(l_ii, rhs, flops);
}

ServerState::ServerState(std::size_t index, std::size_t n_servers, std::vector<Matrix> x_row)
    : index_(index), n_servers_(n_servers), x_row_(std::move(x_row)) {
  if (index_ < 1 || index_ > n_servers_) throw DimensionError("server index out of range");
  if (!x_row_.empty() && x_row_.size() != n_servers_)
    throw DimensionError("server row must hold N blocks");
  assigned_ = !x_row_.empty();
  l_row_.resize(index_);
  u_out_.resize(n_servers_ - index_ + 1);
  diag_updated_ = index_ == 1;  // nothing upstream of the first row
}

bool ServerState::has_u(std::size_t k, std::size_t j) const {
  return u_store_.count({k, j}) != 0;
}

const Matrix& ServerState::u_block(std::size_t k, std::size_t j) const {
  return u_store_.at({k, j});
}

bool ServerState::row_complete() const {
  if (!assigned_ || !diag_updated_ || !factored_) return false;
  for (const auto& l : l_row_)
    if (!l) return false;
  for (const auto& u : u_out_)
    if (!u) return false;
  return true;
}

void ServerState::push_own(const std::string& label, const Matrix& m) {
  if (index_ == n_servers_) return;  // last server only reports to the client
  own_current_.push_back(LabeledBlock{label, m});
}

void ServerState::send_blocks(std::vector<ServerMessage>& out, std::vector<LabeledBlock> blocks) {
  if (blocks.empty() || index_ >= n_servers_) return;
  ServerMessage msg = make_message(static_cast<int>(index_), static_cast<int>(index_ + 1),
                                   MsgKind::u_blocks, std::move(blocks));
  msg.emit_flops = flops_;
  out.push_back(std::move(msg));
}

void ServerState::note_task_done(std::vector<ServerMessage>& out) {
  ++tasks_done_;
  const std::size_t threshold = index_ == 1 ? 1 : 2;
  if (!activated_ && tasks_done_ == threshold && index_ < n_servers_) {
    activated_ = true;
    if (index_ == 1) {
      // Activation send is the freshly factored U_11.
      send_blocks(out, std::move(own_current_));
      own_current_.clear();
    } else {
      send_blocks(out, std::move(relay_pending_));
      relay_pending_.clear();
    }
  } else if (activated_ && index_ == 1) {
    // No upstream traffic to ride on: singleton sends.
    send_blocks(out, std::move(own_current_));
    own_current_.clear();
  }
}

bool ServerState::run_ready_tasks(std::vector<ServerMessage>& out) {
  bool progress = false;
  bool repeat = true;
  while (repeat) {
    repeat = false;

    for (std::size_t k = 1; k < index_; ++k) {
      if (l_row_[k - 1]) continue;
      bool ready = true;
      for (std::size_t m = 1; m < k && ready; ++m)
        if (!l_row_[m - 1] || !has_u(m, k)) ready = false;
      if (!ready || !has_u(k, k)) break;
      Matrix prior(x_row_[k - 1].rows(), x_row_[k - 1].cols());
      const Matrix* prior_ptr = nullptr;
      for (std::size_t m = 1; m < k; ++m) {
        Matrix term = multiply(*l_row_[m - 1], u_block(m, k), &flops_);
        if (prior_ptr) {
          for (std::size_t r = 0; r < prior.rows(); ++r)
            for (std::size_t c = 0; c < prior.cols(); ++c) prior.at(r, c) += term.at(r, c);
          flops_ += prior.rows() * prior.cols();
        } else {
          prior = std::move(term);
        }
        prior_ptr = &prior;
      }
      l_row_[k - 1] = compute_l_block(x_row_[k - 1], prior_ptr, u_block(k, k), &flops_);
      note_task_done(out);
      progress = repeat = true;
    }

    if (!diag_updated_) {
      bool ready = true;
      for (std::size_t k = 1; k < index_ && ready; ++k)
        if (!l_row_[k - 1] || !has_u(k, index_)) ready = false;
      if (ready) {
        for (std::size_t k = 1; k < index_; ++k) {
          const Matrix prod = multiply(*l_row_[k - 1], u_block(k, index_), &flops_);
          x_row_[index_ - 1] = subtract(x_row_[index_ - 1], prod, &flops_);
        }
        diag_updated_ = true;
        note_task_done(out);
        progress = repeat = true;
      }
    }

    if (diag_updated_ && !factored_) {
      LuPair lu = factor_diag(x_row_[index_ - 1], &flops_);
      l_row_[index_ - 1] = std::move(lu.l);
      u_out_[0] = std::move(lu.u);
      factored_ = true;
      push_own(block_label('U', index_, index_), *u_out_[0]);
      note_task_done(out);
      progress = repeat = true;
    }

    if (factored_) {
      for (std::size_t j = index_ + 1; j <= n_servers_; ++j) {
        if (u_out_[j - index_]) continue;
        bool ready = true;
        for (std::size_t k = 1; k < index_ && ready; ++k)
          if (!has_u(k, j)) ready = false;
        if (!ready) continue;
        Matrix prior(x_row_[j - 1].rows(), x_row_[j - 1].cols());
        const Matrix* prior_ptr = nullptr;
        for (std::size_t k = 1; k < index_; ++k) {
          Matrix term = multiply(*l_row_[k - 1], u_block(k, j), &flops_);
          if (prior_ptr) {
            for (std::size_t r = 0; r < prior.rows(); ++r)
              for (std::size_t c = 0; c < prior.cols(); ++c) prior.at(r, c) += term.at(r, c);
            flops_ += prior.rows() * prior.cols();
          } else {
            prior = std::move(term);
          }
          prior_ptr = &prior;
        }
        u_out_[j - index_] = compute_u_block(x_row_[j - 1], prior_ptr, *l_row_[index_ - 1], &flops_);
        push_own(block_label('U', index_, j), *u_out_[j - index_]);
        note_task_done(out);
        progress = repeat = true;
      }
    }
  }
  return progress;
}

void ServerState::emit_result(std::vector<ServerMessage>& out) {
  std::vector<LabeledBlock> res;
  for (std::size_t k = 1; k <= index_; ++k) res.push_back(labeled('L', index_, k, *l_row_[k - 1]));
  for (std::size_t j = index_; j <= n_servers_; ++j)
    res.push_back(labeled('U', index_, j, *u_out_[j - index_]));
  ServerMessage msg =
      make_message(static_cast<int>(index_), kClientNode, MsgKind::result, std::move(res));
  msg.emit_flops = flops_;
  out.push_back(std::move(msg));
  result_sent_ = true;
}

void ServerState::emit_failure(std::vector<ServerMessage>& out, const std::string& reason) {
  ServerMessage msg = make_message(static_cast<int>(index_), kClientNode, MsgKind::result, {});
  msg.failure = true;
  msg.fail_reason = reason;
  msg.emit_flops = flops_;
  out.push_back(std::move(msg));
  result_sent_ = true;
}

std::vector<ServerMessage> ServerState::handle(const ServerMessage& msg) {
  std::vector<ServerMessage> out;
  if (msg.to != static_cast<int>(index_))
    throw ProtocolViolation("message delivered to the wrong server");
  if (result_sent_) throw ProtocolViolation("message received after the result was sent");

  if (msg.kind == MsgKind::assign_row) {
    if (msg.from != kClientNode) throw ProtocolViolation("row assignment must come from the client");
    if (assigned_) throw ProtocolViolation("duplicate row assignment");
    if (msg.blocks.size() != n_servers_)
      throw ProtocolViolation("row assignment must carry N blocks");
    x_row_.clear();
    for (const auto& b : msg.blocks) {
      const auto [bi, bj] = block_indices(b.label);
      if (b.label[0] != 'X' || bi != index_ || bj != x_row_.size() + 1)
        throw ProtocolViolation("assignment block " + b.label + " out of place at server " +
                                std::to_string(index_));
      x_row_.push_back(b.m);
    }
    assigned_ = true;
  } else if (msg.kind == MsgKind::u_blocks) {
    if (msg.from != static_cast<int>(index_) - 1)
      throw ProtocolViolation("U blocks must arrive from the immediate upstream server");
    if (!assigned_) throw ProtocolViolation("U blocks received before row assignment");
    for (const auto& b : msg.blocks) {
      const auto [k, j] = block_indices(b.label);
      if (b.label[0] != 'U' || k >= index_ || j < k)
        throw ProtocolViolation("unexpected block " + b.label + " at server " +
                                std::to_string(index_));
      if (!u_store_.emplace(std::make_pair(k, j), b.m).second)
        throw ProtocolViolation("duplicate block " + b.label);
      relay_pending_.push_back(b);
    }
  } else {
    throw ProtocolViolation("servers accept only row assignments and U blocks");
  }

  // Post-activation relay fires before any new computation: the incoming
  // blocks ride out together with own blocks from earlier processing
  // steps, so bundles match the staggered schedule and the downstream
  // neighbor is not held up by this step's work.
  if (index_ > 1 && index_ < n_servers_ && activated_ && !own_prior_.empty()) {
    std::vector<LabeledBlock> payload = std::move(relay_pending_);
    relay_pending_.clear();
    for (auto& b : own_prior_) payload.push_back(std::move(b));
    own_prior_.clear();
    send_blocks(out, std::move(payload));
  }

  try {
    run_ready_tasks(out);
  } catch (const SingularPivotError& e) {
    emit_failure(out, e.what());
    return out;
  }

  if (row_complete() && !result_sent_) {
    if (index_ < n_servers_) {
      std::vector<LabeledBlock> tail = std::move(relay_pending_);
      relay_pending_.clear();
      for (auto& b : own_prior_) tail.push_back(std::move(b));
      own_prior_.clear();
      for (auto& b : own_current_) tail.push_back(std::move(b));
      own_current_.clear();
      send_blocks(out, std::move(tail));
    }
    emit_result(out);
  } else {
    for (auto& b : own_current_) own_prior_.push_back(std::move(b));
    own_current_.clear();
  }
  return out;
}

std::vector<const Matrix*> ServerState::held_blocks() const {
  std::vector<const Matrix*> out;
  for (const auto& m : x_row_) out.push_back(&m);
  for (const auto& [key, m] : u_store_) out.push_back(&m);
  for (const auto& l : l_row_)
    if (l) out.push_back(&*l);
  for (const auto& u : u_out_)
    if (u) out.push_back(&*u);
  return out;
}

}  // namespace spdc
