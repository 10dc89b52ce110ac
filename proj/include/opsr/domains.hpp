#pragma once

// Task generators and the plain-text grid DSL for the three benchmark
// domains: the exhaustively enumerable mini gridworld, Craftworld, and
// Lightworld (with its engineered agent-space sensors).
//
// DSL format: line 1 is `domain=<mini|craftworld|lightworld>`, followed by
// optional `meta key=value` lines, followed by the rectangular glyph grid.
// The glyph table is documented in docs/task_format.md.

#include "opsr/mdp.hpp"
#include "opsr/outcomes.hpp"
#include "opsr/rng.hpp"

#include <array>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace opsr {

enum class DomainKind { mini, craftworld, lightworld };

inline std::string domain_name(DomainKind k) {
  switch (k) {
    case DomainKind::mini: return "mini";
    case DomainKind::craftworld: return "craftworld";
    case DomainKind::lightworld: return "lightworld";
  }
  return "?";
}

inline DomainKind domain_from_name(const std::string& name) {
  if (name == "mini") return DomainKind::mini;
  if (name == "craftworld") return DomainKind::craftworld;
  if (name == "lightworld") return DomainKind::lightworld;
  throw std::invalid_argument("unknown domain: " + name);
}

struct GridTaskSpec {
  DomainKind kind = DomainKind::mini;
  int width = 0, height = 0;
  std::vector<std::string> rows;  // glyph grid, rows[y][x]
  int start_x = -1, start_y = -1;
  std::map<std::string, std::string> meta;

  char at(int x, int y) const { return rows[y][x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

struct ParseError : std::runtime_error {
  int line, column;
  ParseError(const std::string& msg, int l, int c)
      : std::runtime_error(msg + " (line " + std::to_string(l) + ", column " +
                           std::to_string(c) + ")"),
        line(l),
        column(c) {}
};

namespace detail {

inline const std::string& domain_glyphs(DomainKind k) {
  static const std::string mini = ".#AG";
  static const std::string craft = ".#AwsTBF";
  static const std::string light = ".#AKLD";
  switch (k) {
    case DomainKind::mini: return mini;
    case DomainKind::craftworld: return craft;
    default: return light;
  }
}

}  // namespace detail

inline GridTaskSpec parse_task(const std::string& text) {
  GridTaskSpec spec;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty task text", 1, 1);
  ++line_no;
  if (line.rfind("domain=", 0) != 0) throw ParseError("first line must be domain=<kind>", 1, 1);
  std::string kind = line.substr(7);
  if (kind == "mini") spec.kind = DomainKind::mini;
  else if (kind == "craftworld") spec.kind = DomainKind::craftworld;
  else if (kind == "lightworld") spec.kind = DomainKind::lightworld;
  else throw ParseError("unknown domain kind '" + kind + "'", 1, 8);

  bool in_grid = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!in_grid && line.rfind("meta ", 0) == 0) {
      auto eq = line.find('=', 5);
      if (eq == std::string::npos) throw ParseError("malformed meta line", line_no, 1);
      spec.meta[line.substr(5, eq - 5)] = line.substr(eq + 1);
      continue;
    }
    in_grid = true;
    if (spec.rows.empty()) spec.width = static_cast<int>(line.size());
    if (static_cast<int>(line.size()) != spec.width)
      throw ParseError("ragged row", line_no, static_cast<int>(line.size()) + 1);
    const std::string& glyphs = detail::domain_glyphs(spec.kind);
    for (int x = 0; x < spec.width; ++x) {
      if (glyphs.find(line[x]) == std::string::npos)
        throw ParseError(std::string("unknown glyph '") + line[x] + "'", line_no, x + 1);
      if (line[x] == 'A') {
        if (spec.start_x >= 0) throw ParseError("multiple agents", line_no, x + 1);
        spec.start_x = x;
        spec.start_y = static_cast<int>(spec.rows.size());
      }
    }
    spec.rows.push_back(line);
  }
  spec.height = static_cast<int>(spec.rows.size());
  if (spec.height == 0) throw ParseError("missing grid", line_no, 1);
  if (spec.start_x < 0) throw ParseError("no agent start", line_no, 1);
  return spec;
}

inline std::string render_task(const GridTaskSpec& spec) {
  std::ostringstream out;
  out << "domain=" << domain_name(spec.kind) << "\n";
  for (const auto& [k, v] : spec.meta) out << "meta " << k << "=" << v << "\n";
  for (const auto& row : spec.rows) out << row << "\n";
  return out.str();
}

// Action order shared by all grid domains: 0=north 1=south 2=west 3=east
// ((dx,dy) with y growing downward). Extra domain actions follow the moves.
inline constexpr std::array<std::array<int, 2>, 4> kMoveDirs = {
    {{0, -1}, {0, 1}, {-1, 0}, {1, 0}}};

struct CompiledTask {
  GridTaskSpec spec;
  TabularMdp mdp;
  OutcomeModel om;
  std::vector<std::string> state_names;

  // Lightworld state annotations (empty for other domains).
  struct LightState {
    int x = 0, y = 0;
    unsigned keys = 0, doors = 0;  // bitmasks of picked keys / opened doors
  };
  std::vector<LightState> light_states;
};

// ---------------------------------------------------------------- mini ----

// Mini gridworld: four move actions, moves into walls or off the grid are
// exact self-loops, the goal is absorbing and entering it is the single
// outcome component.
inline CompiledTask compile_mini(const GridTaskSpec& spec, double discount = 0.95,
                                 double goal_weight = 1.0) {
  struct Cell { int x, y; };
  int gx = -1, gy = -1;
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      if (spec.at(x, y) == 'G') { gx = x; gy = y; }
  if (gx < 0) throw std::invalid_argument("compile_mini: no goal glyph");

  auto walkable = [&](int x, int y) {
    return spec.in_bounds(x, y) && spec.at(x, y) != '#';
  };
  // Reachable cells from the start; the goal absorbs (no expansion past it).
  std::vector<int> state_of(spec.width * spec.height, -1);
  std::vector<Cell> cells;
  std::vector<Cell> queue = {{spec.start_x, spec.start_y}};
  state_of[spec.start_y * spec.width + spec.start_x] = 0;
  cells.push_back(queue[0]);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    Cell c = queue[head];
    if (c.x == gx && c.y == gy) continue;  // episode over; do not expand
    for (const auto& d : kMoveDirs) {
      int nx = c.x + d[0], ny = c.y + d[1];
      if (!walkable(nx, ny)) continue;
      int& id = state_of[ny * spec.width + nx];
      if (id >= 0) continue;
      id = static_cast<int>(cells.size());
      cells.push_back({nx, ny});
      queue.push_back({nx, ny});
    }
  }

  CompiledTask out;
  out.spec = spec;
  int n = static_cast<int>(cells.size());
  out.mdp = TabularMdp::zeros(n, 4, discount);
  out.mdp.initial_state = 0;
  out.om = OutcomeModel::zeros(out.mdp, 1);
  out.om.reward_weights = {goal_weight};
  out.om.labels = {"goal"};
  for (int s = 0; s < n; ++s) {
    Cell c = cells[s];
    out.state_names.push_back("(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")");
    bool is_goal = (c.x == gx && c.y == gy);
    if (is_goal) {
      out.mdp.make_terminal(s);
      continue;
    }
    for (int a = 0; a < 4; ++a) {
      int nx = c.x + kMoveDirs[a][0], ny = c.y + kMoveDirs[a][1];
      int t = walkable(nx, ny) ? state_of[ny * spec.width + nx] : s;
      if (t < 0) t = s;  // walkable but unreachable cannot happen from a reachable cell
      out.mdp.p(s, a, t) = 1.0;
      if (t != s && cells[t].x == gx && cells[t].y == gy) {
        out.om.sig(4, n, s, a, t)[0] = 1.0;
        out.mdp.r(s, a, t) = goal_weight;
      }
    }
  }
  return out;
}

// Exhaustive mini-domain enumeration: both grid orientations (2x3 and 3x2),
// zero to two obstacle cells, and every ordered (start, goal) pair of
// distinct free cells. Unsolvable layouts are kept; a different start is a
// different task.
inline std::vector<GridTaskSpec> enumerate_mini_domain() {
  std::vector<GridTaskSpec> out;
  for (auto [w, h] : std::vector<std::pair<int, int>>{{3, 2}, {2, 3}}) {
    const int cells = w * h;
    // obstacle subsets of size 0..2, lexicographic
    std::vector<std::vector<int>> obstacle_sets;
    obstacle_sets.push_back({});
    for (int i = 0; i < cells; ++i) obstacle_sets.push_back({i});
    for (int i = 0; i < cells; ++i)
      for (int j = i + 1; j < cells; ++j) obstacle_sets.push_back({i, j});
    for (const auto& obs : obstacle_sets) {
      std::vector<int> free;
      for (int i = 0; i < cells; ++i) {
        bool blocked = false;
        for (int o : obs) blocked = blocked || (o == i);
        if (!blocked) free.push_back(i);
      }
      for (int si : free)
        for (int gi : free) {
          if (si == gi) continue;
          GridTaskSpec spec;
          spec.kind = DomainKind::mini;
          spec.width = w;
          spec.height = h;
          spec.rows.assign(h, std::string(w, '.'));
          for (int o : obs) spec.rows[o / w][o % w] = '#';
          spec.rows[si / w][si % w] = 'A';
          spec.rows[gi / w][gi % w] = 'G';
          spec.start_x = si % w;
          spec.start_y = si / w;
          out.push_back(std::move(spec));
        }
    }
  }
  return out;
}

// ---------------------------------------------------------- craftworld ----

// Craftworld: a 4x4 grid with a wood source, a stone source, and three
// workstations (toolshed 'T', workbench 'B', factory 'F'). Item cells are not
// walkable; the agent interacts by facing a cell and performing `use`
// (action 4). Facing follows the last attempted move. Crafting dependencies:
// use(wood)->wood, use(stone)->stone, use(toolshed)+wood->handle,
// use(workbench)+stone->head, use(factory)+handle+head->hammer (terminal).
// Acquired items are flags, never consumed. Every action costs -1 and the
// hammer adds +1000; the reward is carried by the outcome components
// (one per item, plus a constant per-step component holding the cost).
inline CompiledTask compile_craftworld(const GridTaskSpec& spec, double discount = 0.999) {
  enum Item { WOOD, STONE, HANDLE, HEAD, HAMMER, N_ITEMS };
  auto glyph_blocking = [](char g) { return g == '#' || g == 'w' || g == 's' || g == 'T' || g == 'B' || g == 'F'; };

  struct St { int x, y, facing; unsigned inv; };
  auto key_of = [&](const St& s) {
    return ((s.y * spec.width + s.x) * 4 + s.facing) * 32u + s.inv;
  };
  std::map<unsigned, int> index;
  std::vector<St> states;
  std::vector<std::uint8_t> is_terminal_state;
  St start{spec.start_x, spec.start_y, 0, 0};  // initially facing north

  // transition record: (from, action, to, item_crafted or -1)
  struct Tr { int s, a, t, item; };
  std::vector<Tr> transitions;

  auto intern = [&](const St& s, bool terminal) {
    auto [it, fresh] = index.emplace(key_of(s), static_cast<int>(states.size()));
    if (fresh) {
      states.push_back(s);
      is_terminal_state.push_back(terminal ? 1 : 0);
    }
    return it->second;
  };
  intern(start, false);
  for (std::size_t head = 0; head < states.size(); ++head) {
    if (is_terminal_state[head]) continue;
    St cur = states[head];
    for (int a = 0; a < 5; ++a) {
      St nxt = cur;
      int item = -1;
      if (a < 4) {
        nxt.facing = a;
        int nx = cur.x + kMoveDirs[a][0], ny = cur.y + kMoveDirs[a][1];
        if (spec.in_bounds(nx, ny) && !glyph_blocking(spec.at(nx, ny))) {
          nxt.x = nx;
          nxt.y = ny;
        }
      } else {
        int fx = cur.x + kMoveDirs[cur.facing][0], fy = cur.y + kMoveDirs[cur.facing][1];
        char g = spec.in_bounds(fx, fy) ? spec.at(fx, fy) : '#';
        if (g == 'w' && !(cur.inv & (1u << WOOD))) item = WOOD;
        else if (g == 's' && !(cur.inv & (1u << STONE))) item = STONE;
        else if (g == 'T' && (cur.inv & (1u << WOOD)) && !(cur.inv & (1u << HANDLE))) item = HANDLE;
        else if (g == 'B' && (cur.inv & (1u << STONE)) && !(cur.inv & (1u << HEAD))) item = HEAD;
        else if (g == 'F' && (cur.inv & (1u << HANDLE)) && (cur.inv & (1u << HEAD)) &&
                 !(cur.inv & (1u << HAMMER))) item = HAMMER;
        if (item >= 0) nxt.inv |= (1u << item);
      }
      int t = intern(nxt, item == HAMMER);
      transitions.push_back({static_cast<int>(head), a, t, item});
    }
  }

  CompiledTask out;
  out.spec = spec;
  int n = static_cast<int>(states.size());
  out.mdp = TabularMdp::zeros(n, 5, discount);
  out.mdp.initial_state = 0;
  // Outcomes: one component per item plus a constant per-step component that
  // carries the -1 action cost (not part of any story).
  out.om = OutcomeModel::zeros(out.mdp, N_ITEMS + 1);
  out.om.labels = {"wood", "stone", "handle", "head", "hammer", "step"};
  out.om.story_relevant = {1, 1, 1, 1, 1, 0};
  out.om.reward_weights = {0, 0, 0, 0, 1000.0, -1.0};
  for (int s = 0; s < n; ++s)
    if (is_terminal_state[s]) out.mdp.make_terminal(s);
  for (const auto& tr : transitions) {
    out.mdp.p(tr.s, tr.a, tr.t) = 1.0;
    double* sg = out.om.sig(5, n, tr.s, tr.a, tr.t);
    sg[N_ITEMS] = 1.0;  // step
    double r = -1.0;
    if (tr.item >= 0) {
      sg[tr.item] = 1.0;
      if (tr.item == HAMMER) r += 1000.0;
    }
    out.mdp.r(tr.s, tr.a, tr.t) = r;
  }
  for (int s = 0; s < n; ++s) {
    const St& st = states[s];
    std::ostringstream name;
    name << "(" << st.x << "," << st.y << ",f" << st.facing << ",inv" << st.inv << ")";
    out.state_names.push_back(name.str());
  }
  return out;
}

// Random 4x4 Craftworld layout; retries until the compiled task is solvable.
inline GridTaskSpec craftworld_generate(std::uint64_t seed, int width = 4, int height = 4) {
  if (width * height < 6)
    throw std::invalid_argument("craftworld_generate: grid too small");
  Rng rng = make_rng(seed, {0xC7AF7ULL});
  const std::string glyph_order = "AwsTBF";
  for (int attempt = 0; attempt < 1000; ++attempt) {
    GridTaskSpec spec;
    spec.kind = DomainKind::craftworld;
    spec.width = width;
    spec.height = height;
    spec.rows.assign(height, std::string(width, '.'));
    std::vector<int> cells(width * height);
    for (int i = 0; i < width * height; ++i) cells[i] = i;
    shuffle(rng, cells);
    for (std::size_t i = 0; i < glyph_order.size(); ++i)
      spec.rows[cells[i] / width][cells[i] % width] = glyph_order[i];
    spec.start_x = cells[0] % width;
    spec.start_y = cells[0] / width;
    CompiledTask task = compile_craftworld(spec);
    auto [pol, v] = solve_optimal(task.mdp, 1e-9);
    // Solvable iff the optimal value at the start exceeds the all-cost floor.
    if (v.values[0] > 0.0) return spec;
  }
  throw std::runtime_error("craftworld_generate: no solvable layout found");
}

// ---------------------------------------------------------- lightworld ----

// Lightworld: rooms in a left-to-right chain. Each room has a door ('D') in
// the wall to the next room (the last door leads outside and ends the
// episode), a wall-mounted lock ('L') that opens that door, and, with
// probability 1/3, a key ('K'). A room's door requires its key iff the room
// has one. Actions: 4 moves, pickup (4), unlock (5). Unlock works when
// standing next to the lock; pickup when standing on the key.
inline GridTaskSpec lightworld_generate(std::uint64_t seed, int n_rooms) {
  if (n_rooms < 2 || n_rooms > 5)
    throw std::invalid_argument("lightworld_generate: n_rooms must be in 2..5");
  Rng rng = make_rng(seed, {0x11687ULL});
  std::vector<int> rw(n_rooms), rh(n_rooms);
  for (int i = 0; i < n_rooms; ++i) {
    rw[i] = 5 + static_cast<int>(uniform_index(rng, 11));  // interior width 5..15
    rh[i] = 5 + static_cast<int>(uniform_index(rng, 11));  // interior height 5..15
  }
  int max_h = 0;
  for (int h : rh) max_h = std::max(max_h, h);
  int H = max_h + 2;
  int W = 1;  // left outer wall
  std::vector<int> x0(n_rooms);
  for (int i = 0; i < n_rooms; ++i) {
    x0[i] = W;
    W += rw[i] + 1;  // interior plus the wall/door column to its right
  }
  GridTaskSpec spec;
  spec.kind = DomainKind::lightworld;
  spec.width = W;
  spec.height = H;
  spec.rows.assign(H, std::string(W, '#'));
  // carve interiors (top-aligned below the outer wall row)
  for (int i = 0; i < n_rooms; ++i)
    for (int y = 1; y <= rh[i]; ++y)
      for (int x = x0[i]; x < x0[i] + rw[i]; ++x) spec.rows[y][x] = '.';
  std::ostringstream rooms_meta;
  for (int i = 0; i < n_rooms; ++i) {
    if (i) rooms_meta << ",";
    rooms_meta << x0[i] << ":" << (x0[i] + rw[i]) << ":" << rh[i];
  }
  spec.meta["rooms"] = rooms_meta.str();
  // doors, locks, keys
  for (int i = 0; i < n_rooms; ++i) {
    int wall_x = x0[i] + rw[i];
    int overlap = (i + 1 < n_rooms) ? std::min(rh[i], rh[i + 1]) : rh[i];
    int door_y = 1 + static_cast<int>(uniform_index(rng, overlap));
    spec.rows[door_y][wall_x] = 'D';
    // lock on a wall segment of this room (top wall above a random interior
    // column), never colliding with the door
    int lock_x = x0[i] + static_cast<int>(uniform_index(rng, rw[i]));
    spec.rows[0][lock_x] = 'L';
    if (uniform_index(rng, 3) == 0) {
      int kx = x0[i] + static_cast<int>(uniform_index(rng, rw[i]));
      int ky = 1 + static_cast<int>(uniform_index(rng, rh[i]));
      if (spec.rows[ky][kx] == '.') spec.rows[ky][kx] = 'K';
    }
  }
  // agent start in the first room
  for (int tries = 0;; ++tries) {
    int sx = x0[0] + static_cast<int>(uniform_index(rng, rw[0]));
    int sy = 1 + static_cast<int>(uniform_index(rng, rh[0]));
    if (spec.rows[sy][sx] == '.') {
      spec.rows[sy][sx] = 'A';
      spec.start_x = sx;
      spec.start_y = sy;
      break;
    }
    if (tries > 200) throw std::runtime_error("lightworld_generate: placement failed");
  }
  return spec;
}

namespace detail {

struct LightLayout {
  struct Room { int x_lo, x_hi, height; };  // interior columns [x_lo, x_hi)
  std::vector<Room> rooms;
  std::vector<std::pair<int, int>> doors;  // one per room, (x, y)
  std::vector<std::pair<int, int>> locks;
  std::vector<std::pair<int, int>> keys;   // (x, y) or (-1,-1) when absent
  int room_of(int x) const {
    for (std::size_t i = 0; i < rooms.size(); ++i)
      if (x >= rooms[i].x_lo && x < rooms[i].x_hi) return static_cast<int>(i);
    return -1;
  }
};

inline LightLayout light_layout(const GridTaskSpec& spec) {
  LightLayout lay;
  auto it = spec.meta.find("rooms");
  if (it == spec.meta.end())
    throw std::invalid_argument("lightworld task missing rooms metadata");
  std::istringstream in(it->second);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    int a, b, h;
    char c1, c2;
    std::istringstream ts(tok);
    ts >> a >> c1 >> b >> c2 >> h;
    lay.rooms.push_back({a, b, h});
  }
  lay.doors.assign(lay.rooms.size(), {-1, -1});
  lay.locks.assign(lay.rooms.size(), {-1, -1});
  lay.keys.assign(lay.rooms.size(), {-1, -1});
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      char g = spec.at(x, y);
      if (g == 'D') {
        // the door on the right wall of room i
        for (std::size_t i = 0; i < lay.rooms.size(); ++i)
          if (x == lay.rooms[i].x_hi) lay.doors[i] = {x, y};
      } else if (g == 'L') {
        int r = lay.room_of(x);
        if (r >= 0) lay.locks[r] = {x, y};
      } else if (g == 'K') {
        int r = lay.room_of(x);
        if (r >= 0) lay.keys[r] = {x, y};
      }
    }
  return lay;
}

}  // namespace detail

// Compiles a lightworld spec into a tabular task. State = (position, keys
// held, doors opened); outcome components are (droom, dkey, ddoor, dgoal);
// stepping through the final door terminates with the goal outcome.
inline CompiledTask compile_lightworld(const GridTaskSpec& spec, double discount = 0.999) {
  auto lay = detail::light_layout(spec);
  const int R = static_cast<int>(lay.rooms.size());

  struct St { int x, y; unsigned keys, doors; };
  auto key_of = [&](const St& s) {
    return ((static_cast<unsigned>(s.y) * spec.width + s.x) * 32u + s.keys) * 32u + s.doors;
  };
  std::vector<St> states;
  std::map<unsigned, int> index;
  auto intern = [&](const St& s) {
    auto [it, fresh] = index.emplace(key_of(s), static_cast<int>(states.size()));
    if (fresh) states.push_back(s);
    return it->second;
  };
  // state 0: start; a single absorbing "outside" state is appended last.
  intern({spec.start_x, spec.start_y, 0, 0});

  struct Tr { int s, a, t; double droom, dkey, ddoor, dgoal; };
  std::vector<Tr> transitions;
  int outside = -1;  // patched after enumeration

  auto walkable = [&](int x, int y, unsigned doors) {
    if (!spec.in_bounds(x, y)) return false;
    char g = spec.at(x, y);
    if (g == '#' || g == 'L') return false;
    if (g == 'D') {
      for (int i = 0; i < R; ++i)
        if (lay.doors[i] == std::make_pair(x, y)) return (doors & (1u << i)) != 0;
      return false;
    }
    return true;  // '.', 'A', 'K'
  };

  for (std::size_t head = 0; head < states.size(); ++head) {
    St cur = states[head];
    int room = lay.room_of(cur.x);
    for (int a = 0; a < 6; ++a) {
      St nxt = cur;
      double droom = 0, dkey = 0, ddoor = 0, dgoal = 0;
      int t;
      if (a < 4) {
        int nx = cur.x + kMoveDirs[a][0], ny = cur.y + kMoveDirs[a][1];
        if (room >= 0 && room == R - 1 && lay.doors[room] == std::make_pair(nx, ny) &&
            (cur.doors & (1u << room))) {
          // exiting the final room ends the episode
          transitions.push_back({static_cast<int>(head), a, -1, 1, 0, 0, 1});
          continue;
        }
        if (walkable(nx, ny, cur.doors)) {
          nxt.x = nx;
          nxt.y = ny;
          int nroom = lay.room_of(nx);
          if (nroom >= 0 && room >= 0 && nroom != room) droom = 1;
        }
      } else if (a == 4) {  // pickup
        if (room >= 0 && lay.keys[room] == std::make_pair(cur.x, cur.y) &&
            !(cur.keys & (1u << room))) {
          nxt.keys |= (1u << room);
          dkey = 1;
        }
      } else {  // unlock
        if (room >= 0 && !(cur.doors & (1u << room))) {
          auto [lx, ly] = lay.locks[room];
          bool adjacent = std::abs(lx - cur.x) + std::abs(ly - cur.y) == 1;
          bool key_ok = lay.keys[room].first < 0 || (cur.keys & (1u << room));
          if (adjacent && key_ok) {
            nxt.doors |= (1u << room);
            ddoor = 1;
          }
        }
      }
      t = intern(nxt);
      transitions.push_back({static_cast<int>(head), a, t, droom, dkey, ddoor, dgoal});
    }
  }
  outside = static_cast<int>(states.size());

  CompiledTask out;
  out.spec = spec;
  int n = outside + 1;
  out.mdp = TabularMdp::zeros(n, 6, discount);
  out.mdp.initial_state = 0;
  out.om = OutcomeModel::zeros(out.mdp, 4);
  out.om.labels = {"room", "key", "door", "goal"};
  out.om.reward_weights = {0, 0, 0, 1.0};
  out.mdp.make_terminal(outside);
  for (const auto& tr : transitions) {
    int t = tr.t < 0 ? outside : tr.t;
    out.mdp.p(tr.s, tr.a, t) = 1.0;
    double* sg = out.om.sig(6, n, tr.s, tr.a, t);
    sg[0] = tr.droom;
    sg[1] = tr.dkey;
    sg[2] = tr.ddoor;
    sg[3] = tr.dgoal;
    out.mdp.r(tr.s, tr.a, t) = tr.dgoal;  // = sigma . w_r
  }
  for (int s = 0; s < outside; ++s) {
    const St& st = states[s];
    std::ostringstream name;
    name << "(" << st.x << "," << st.y << ",k" << st.keys << ",d" << st.doors << ")";
    out.state_names.push_back(name.str());
    out.light_states.push_back({st.x, st.y, st.keys, st.doors});
  }
  out.state_names.push_back("(outside)");
  out.light_states.push_back({-1, -1, 0, 0});
  return out;
}

inline CompiledTask compile_task(const GridTaskSpec& spec) {
  switch (spec.kind) {
    case DomainKind::mini: return compile_mini(spec);
    case DomainKind::craftworld: return compile_craftworld(spec);
    case DomainKind::lightworld: return compile_lightworld(spec);
  }
  throw std::invalid_argument("compile_task: unknown kind");
}

// The 12 agent-space sensors: for each of {key, lock, door} x {N,S,W,E},
// max(0, 1 - distance/20) to the nearest object of that type along a
// straight, wall-occluded line; 1 when standing on it (all four directions).
// Picked-up keys are no longer sensed.
inline std::array<double, 12> agent_space_features(const CompiledTask& task, int s) {
  if (task.spec.kind != DomainKind::lightworld)
    throw std::invalid_argument("agent_space_features: lightworld only");
  auto lay = detail::light_layout(task.spec);
  const auto& st = task.light_states.at(s);
  std::array<double, 12> out{};
  if (st.x < 0) return out;  // outside: all sensors dark
  auto key_present = [&](int x, int y) {
    for (std::size_t i = 0; i < lay.keys.size(); ++i)
      if (lay.keys[i] == std::make_pair(x, y)) return !(st.keys & (1u << i));
    return false;
  };
  auto type_at = [&](int x, int y, int type) {
    char g = task.spec.at(x, y);
    if (type == 0) return g == 'K' && key_present(x, y);
    if (type == 1) return g == 'L';
    return g == 'D';
  };
  for (int type = 0; type < 3; ++type) {
    if (type == 0 && key_present(st.x, st.y)) {
      for (int d = 0; d < 4; ++d) out[type * 4 + d] = 1.0;
      continue;
    }
    for (int d = 0; d < 4; ++d) {
      double v = 0.0;
      for (int dist = 1; dist < 20; ++dist) {
        int x = st.x + kMoveDirs[d][0] * dist, y = st.y + kMoveDirs[d][1] * dist;
        if (!task.spec.in_bounds(x, y)) break;
        if (type_at(x, y, type)) {
          v = std::max(0.0, 1.0 - dist / 20.0);
          break;
        }
        char g = task.spec.at(x, y);
        if (g == '#' || g == 'L' || g == 'D') break;  // occluding cell
      }
      out[type * 4 + d] = v;
    }
  }
  return out;
}

}  // namespace opsr
