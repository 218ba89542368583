#ifndef SPDC_BLOCKLU_HPP
#define SPDC_BLOCKLU_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spdc/matrix.hpp"

namespace spdc {

constexpr int kClientNode = 0;

enum class MsgKind { assign_row, u_blocks, result };

std::string to_string(MsgKind k);

struct LabeledBlock {
  std::string label;  // "X_12", "U_12", "L_21" (1-based block coordinates)
  Matrix m;
};

std::string block_label(char type, std::size_t i, std::size_t j);

// Inverse of block_label: the 1-based block coordinates of "U_12" etc.
std::pair<std::size_t, std::size_t> block_indices(const std::string& label);

struct ServerMessage {
  int from = kClientNode;
  int to = kClientNode;
  MsgKind kind = MsgKind::assign_row;
  std::vector<LabeledBlock> blocks;
  std::size_t size = 0;  // reals carried
  bool failure = false;
  std::string fail_reason;
  std::uint64_t emit_flops = 0;  // sender's flop counter at emission time
};

ServerMessage make_message(int from, int to, MsgKind kind, std::vector<LabeledBlock> blocks);

// Diagonal-block Doolittle factorization.
LuPair factor_diag(const Matrix& x_ii, std::uint64_t* flops = nullptr);

// L_ik from the right-solve L_ik * U_kk = X_ik - prior, prior being the
// accumulated sum of L_im * U_mk for m < k (null means zero).
Matrix compute_l_block(const Matrix& x_ik, const Matrix* prior, const Matrix& u_kk,
                       std::uint64_t* flops = nullptr);

// U_ij from the forward-solve L_ii * U_ij = X_ij - prior, prior being the
// accumulated sum of L_ik * U_kj for k < i.
Matrix compute_u_block(const Matrix& x_ij, const Matrix* prior, const Matrix& l_ii,
                       std::uint64_t* flops = nullptr);

// One edge server: owns block row i of the ciphertext, consumes U rows
// 1..i-1 from its upstream neighbor, and emits U blocks downstream plus a
// single result bundle {L_i1..L_ii, U_ii..U_iN} to the client.
//
// Forwarding follows the staggered one-way schedule: the downstream
// neighbor is activated by a first send the moment the first task (i = 1)
// or first two tasks (i >= 2) complete; afterwards each processed upstream
// message is relayed together with the U blocks computed in earlier
// processing steps, and whatever remains is flushed when the row
// completes, right before the result.
class ServerState {
 public:
  ServerState(std::size_t index, std::size_t n_servers, std::vector<Matrix> x_row);

  // Processes one message and returns the emissions, in send order. On a
  // singular pivot the last emission is a failure result.
  std::vector<ServerMessage> handle(const ServerMessage& msg);

  std::size_t index() const { return index_; }
  std::size_t flops() const { return flops_; }
  bool done() const { return result_sent_; }
  std::size_t tasks_completed() const { return tasks_done_; }

  // Every matrix block this server has ever held (for privacy checks).
  std::vector<const Matrix*> held_blocks() const;

 private:
  bool has_u(std::size_t k, std::size_t j) const;
  const Matrix& u_block(std::size_t k, std::size_t j) const;
  bool run_ready_tasks(std::vector<ServerMessage>& out);
  void note_task_done(std::vector<ServerMessage>& out);
  void push_own(const std::string& label, const Matrix& m);
  void send_blocks(std::vector<ServerMessage>& out, std::vector<LabeledBlock> blocks);
  void emit_result(std::vector<ServerMessage>& out);
  void emit_failure(std::vector<ServerMessage>& out, const std::string& reason);
  bool row_complete() const;

  std::size_t index_;      // 1-based
  std::size_t n_servers_;  // N
  std::vector<Matrix> x_row_;
  std::map<std::pair<std::size_t, std::size_t>, Matrix> u_store_;
  std::vector<std::optional<Matrix>> l_row_;  // L_i1..L_ii
  std::vector<std::optional<Matrix>> u_out_;  // U_ii..U_iN
  bool assigned_ = false;
  bool diag_updated_ = false;
  bool factored_ = false;
  bool activated_ = false;
  bool result_sent_ = false;
  std::size_t tasks_done_ = 0;
  std::uint64_t flops_ = 0;

  std::vector<LabeledBlock> relay_pending_;
  std::vector<LabeledBlock> own_prior_;
  std::vector<LabeledBlock> own_current_;
};

}  // namespace spdc

#endif
