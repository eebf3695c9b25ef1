#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <set>

#include "provhunt/bench.hpp"

namespace provhunt {

const std::vector<std::string>& campaign_names() {
  static const std::vector<std::string> names = {"upgrade-hijack", "shell-recon-exfil", "credential-theft"};
  return names;
}

void ScenarioSpec::validate() const {
  if (target_events == 0) throw Error("bench", "target_events must be >= 1");
  if (users < 1 || users > 3) throw Error("bench", "users must be in [1, 3]");
  if (public_sites == 0 || web_clients == 0) throw Error("bench", "site and client pools must be non-empty");
  if (duration_ms <= 0 || start_ms < 0) throw Error("bench", "bad time span");
  if (duration_ms > 30LL * 86'400'000) throw Error("bench", "duration exceeds 30 days");
  if (inject_at.size() != campaigns.size()) throw Error("bench", "inject_at needs one entry per campaign");
  for (const auto& c : campaigns)
    if (std::find(campaign_names().begin(), campaign_names().end(), c) == campaign_names().end())
      throw Error("bench", "unknown campaign '" + c + "'");
  for (double f : inject_at)
    if (!(f >= 0.0 && f <= 1.0)) throw Error("bench", "inject_at fractions must be in [0, 1]");
}

std::size_t Scenario::attack_event_count() const {
  std::size_t n = 0;
  for (const auto& c : campaigns) n += c.events.size();
  return n;
}

std::vector<PoiPattern> Scenario::all_iocs() const {
  std::vector<PoiPattern> out;
  for (const auto& c : campaigns) out.insert(out.end(), c.iocs.begin(), c.iocs.end());
  return out;
}

namespace {

struct Entity {
  std::string id;
  std::string name;
  EntityKind kind = EntityKind::File;
  std::optional<Ipv4> addr;
};

Direction default_dir(EdgeOp op) {
  return (op == EdgeOp::Read || op == EdgeOp::Load || op == EdgeOp::Recv) ? Direction::ObjToSbj
                                                                          : Direction::SbjToObj;
}

struct Pending {
  std::int64_t ts;
  std::size_t seq;
  AuditEvent e;
  int campaign;
  bool operator>(const Pending& o) const { return std::tie(ts, seq) > std::tie(o.ts, o.seq); }
};

class Generator {
 public:
  Generator(const ScenarioSpec& spec, const AbstractionRules& rules) : spec_(spec), rules_(rules), rng_(spec.seed), iocs_(spec.campaigns.size()) {}

  Scenario run() {
    Scenario out;
    out.spec = spec_;
    now_ = spec_.start_ms;
    gap_ = double(spec_.duration_ms) / double(spec_.target_events);
    boot();

    std::vector<std::size_t> inject_idx;
    for (double f : spec_.inject_at) inject_idx.push_back(std::size_t(f * double(spec_.target_events)));
    std::vector<bool> injected(spec_.campaigns.size(), false);

    while (events_.size() < spec_.target_events) {
      for (std::size_t c = 0; c < spec_.campaigns.size(); ++c)
        if (!injected[c] && events_.size() >= inject_idx[c]) {
          injected[c] = true;
          schedule_campaign(int(c));
        }
      benign_activity();
    }
    for (std::size_t c = 0; c < spec_.campaigns.size(); ++c)
      if (!injected[c]) schedule_campaign(int(c));
    while (!pending_.empty()) {
      const auto p = pending_.top();
      pending_.pop();
      now_ = std::max(now_, p.ts);
      push(p.e, p.campaign);
    }

    out.events = std::move(events_);
    for (std::size_t c = 0; c < spec_.campaigns.size(); ++c) {
      CampaignTruth t;
      t.name = spec_.campaigns[c];
      t.iocs = iocs_[c];
      out.campaigns.push_back(std::move(t));
    }
    for (std::size_t i = 0; i < out.events.size(); ++i)
      if (owner_[i] >= 0) out.campaigns[std::size_t(owner_[i])].events.push_back(i);
    std::set<std::string> benign_ids;
    for (std::size_t i = 0; i < out.events.size(); ++i)
      if (owner_[i] < 0) {
        benign_ids.insert(out.events[i].sbj_id);
        benign_ids.insert(out.events[i].obj_id);
      }
    for (auto& t : out.campaigns) {
      std::set<std::string> ids;
      std::vector<AuditEvent> evs;
      for (const auto i : t.events) {
        ids.insert(out.events[i].sbj_id);
        ids.insert(out.events[i].obj_id);
        evs.push_back(out.events[i]);
      }
      t.entities.assign(ids.begin(), ids.end());
      for (const auto& id : ids)
        if (!benign_ids.contains(id)) t.attack_only.push_back(id);
      t.query = graph_from_events(evs, rules_);
      t.query.label = t.name;
    }
    return out;
  }

 private:
  const ScenarioSpec& spec_;
  const AbstractionRules& rules_;
  std::mt19937_64 rng_;
  std::int64_t now_ = 0;
  double gap_ = 1;
  int next_pid_ = 1000;
  std::size_t launches_ = 0;
  std::size_t seq_ = 0;
  std::vector<AuditEvent> events_;
  std::vector<int> owner_;  // campaign per event, -1 = benign
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending_;
  std::vector<std::vector<PoiPattern>> iocs_;

  Entity systemd_, sshd_, nginx_, cron_, rsyslogd_, mysqld_, journald_;
  std::vector<Entity> shells_, browsers_, editors_;
  std::vector<std::string> users_;

  // -- randomness
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool coin(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }
  std::size_t zipf(std::size_t n) {
    // rank r with weight 1/(r+1)
    static thread_local std::vector<double> cdf;
    cdf.resize(n);
    double s = 0;
    for (std::size_t r = 0; r < n; ++r) cdf[r] = s += 1.0 / double(r + 1);
    const double x = std::uniform_real_distribution<double>(0, s)(rng_);
    return std::size_t(std::lower_bound(cdf.begin(), cdf.end(), x) - cdf.begin());
  }

  // -- entities
  static Entity file(const std::string& path) { return {"file:" + path, path, EntityKind::File, std::nullopt}; }
  static Entity net(const std::string& ip, int port) {
    const auto text = ip + ":" + std::to_string(port);
    return {"net:" + text, text, EntityKind::Netflow, Ipv4::parse(ip)};
  }
  Entity new_proc(const std::string& exe) { return {"proc:" + std::to_string(next_pid_++), exe, EntityKind::Process, std::nullopt}; }

  std::string public_ip(std::size_t k, int salt) const {
    // deterministic public addresses away from the reserved ranges
    unsigned a = 23 + unsigned((k * 37 + std::size_t(salt) * 11) % 150);
    if (a == 127 || a == 172) ++a;
    return std::to_string(a) + "." + std::to_string((k * 53 + 17) % 250 + 1) + "." +
           std::to_string((k * 97 + std::size_t(salt)) % 250 + 1) + "." + std::to_string((k * 29 + 3) % 250 + 1);
  }

  // -- emission
  void push(const AuditEvent& e, int campaign) {
    events_.push_back(e);
    owner_.push_back(campaign);
  }

  void tick() {
    now_ += 1 + std::int64_t(std::uniform_real_distribution<double>(0, 2 * gap_)(rng_));
    while (!pending_.empty() && pending_.top().ts <= now_) {
      const auto p = pending_.top();
      pending_.pop();
      push(p.e, p.campaign);
    }
  }

  static AuditEvent make(std::int64_t ts, const Entity& s, EdgeOp op, const Entity& o) {
    AuditEvent e;
    e.ts = ts;
    e.sbj_id = s.id;
    e.sbj_name = s.name;
    e.obj_id = o.id;
    e.obj_name = o.name;
    e.obj_kind = o.kind;
    e.op = op;
    e.dir = default_dir(op);
    e.obj_addr = o.addr;
    return e;
  }

  void emit(const Entity& s, EdgeOp op, const Entity& o) {
    tick();
    push(make(now_, s, op, o), -1);
  }

  Entity spawn(const Entity& parent, const std::string& exe, bool libs = true) {
    auto child = new_proc(exe);
    emit(parent, EdgeOp::Fork, child);
    if (libs) {
      emit(child, EdgeOp::Load, file("/usr/lib/x86_64-linux-gnu/libc.so.6"));
      if (coin(0.3)) emit(child, EdgeOp::Read, file("/etc/ld.so.cache"));
    }
    ++launches_;
    return child;
  }

  // -- pools
  std::string home(std::size_t u) const { return "/home/" + users_[u]; }
  Entity doc(std::size_t u) {
    static const char* ext[] = {".txt", ".pdf", ".md", ".csv", ".docx"};
    const auto k = zipf(24);
    return file(home(u) + "/docs/report" + std::to_string(k) + ext[k % 5]);
  }
  Entity cfg() {
    static const char* f[] = {"/etc/hosts", "/etc/resolv.conf", "/etc/os-release", "/etc/hostname", "/etc/nsswitch.conf",
                              "/etc/localtime", "/etc/group", "/etc/passwd", "/etc/locale.conf", "/etc/environment"};
    return file(f[zipf(10)]);
  }
  Entity lib() {
    static const char* f[] = {"libssl.so.3", "libcrypto.so.3", "libz.so.1", "libm.so.6", "libpthread.so.0",
                              "libstdc++.so.6", "libgcc_s.so.1", "libpcre2-8.so.0", "libsqlite3.so.0", "libcurl.so.4",
                              "libxml2.so.2", "libffi.so.8"};
    return file(std::string("/usr/lib/x86_64-linux-gnu/") + f[zipf(12)]);
  }
  Entity site(std::size_t salt = 0) { return net(public_ip(zipf(spec_.public_sites), int(salt)), 443); }

  // -- background
  void boot() {
    static const char* names[] = {"alice", "bob", "carol"};
    for (int u = 0; u < spec_.users; ++u) users_.push_back(names[u]);
    systemd_ = {"proc:1", "/usr/lib/systemd/systemd", EntityKind::Process, std::nullopt};
    journald_ = spawn(systemd_, "/usr/lib/systemd/systemd-journald");
    rsyslogd_ = spawn(systemd_, "/usr/sbin/rsyslogd");
    emit(rsyslogd_, EdgeOp::Read, file("/etc/rsyslog.conf"));
    sshd_ = spawn(systemd_, "/usr/sbin/sshd");
    emit(sshd_, EdgeOp::Read, file("/etc/ssh/sshd_config"));
    cron_ = spawn(systemd_, "/usr/sbin/cron");
    emit(cron_, EdgeOp::Read, file("/etc/crontab"));
    mysqld_ = spawn(systemd_, "/usr/sbin/mysqld");
    emit(mysqld_, EdgeOp::Read, file("/etc/mysql/my.cnf"));
    nginx_ = spawn(systemd_, "/usr/sbin/nginx");
    emit(nginx_, EdgeOp::Read, file("/etc/nginx/nginx.conf"));
    for (std::size_t u = 0; u < users_.size(); ++u) {
      auto login = spawn(systemd_, "/usr/lib/systemd/systemd-logind");
      auto sh = spawn(login, "/usr/bin/bash");
      emit(sh, EdgeOp::Read, file(home(u) + "/.bashrc"));
      emit(sh, EdgeOp::Read, file("/etc/profile"));
      shells_.push_back(sh);
      auto br = spawn(sh, "/usr/lib/firefox/firefox");
      emit(br, EdgeOp::Read, file(home(u) + "/.mozilla/firefox/prefs.js"));
      browsers_.push_back(br);
      static const char* eds[] = {"/opt/notepad++/notepad++.exe", "/usr/bin/code", "/usr/bin/gedit"};
      editors_.push_back(spawn(sh, eds[u]));
    }
  }

  bool budget_left() const { return launches_ < spec_.process_budget; }

  void benign_activity() {
    static const std::vector<double> w = {26, 18, 14, 5, 4, 3, 9, 2, 6, 3};
    std::discrete_distribution<int> act(w.begin(), w.end());
    const std::size_t u = pick(users_.size());
    switch (act(rng_)) {
      case 0: browse(u); break;
      case 1: if (budget_left()) shell_command(shells_[u], u); else browse(u); break;
      case 2: web_request(); break;
      case 3: database(); break;
      case 4: if (budget_left()) cron_job(); else logging(); break;
      case 5: if (budget_left()) ssh_session(); else web_request(); break;
      case 6: edit(u); break;
      case 7: if (budget_left() && u == 0) update_check(); else edit(u); break;
      case 8: logging(); break;
      default: if (budget_left()) build(u); else edit(u); break;
    }
  }

  void browse(std::size_t u) {
    const auto& b = browsers_[u];
    const auto s = site(u);
    emit(b, EdgeOp::Connect, s);
    emit(b, EdgeOp::Send, s);
    emit(b, EdgeOp::Recv, s);
    if (coin(0.5)) emit(b, EdgeOp::Recv, s);
    emit(b, EdgeOp::Write, file(home(u) + "/.cache/mozilla/firefox/cache2/entries/e" + std::to_string(zipf(20))));
    if (coin(0.15)) emit(b, EdgeOp::Write, file(home(u) + "/.mozilla/firefox/cookies.sqlite"));
    if (coin(0.05)) emit(b, EdgeOp::Write, file(home(u) + "/downloads/file" + std::to_string(pick(8)) + ".pdf"));
  }

  void shell_command(const Entity& sh, std::size_t u) {
    static const std::vector<std::string> cmds = {"ls", "cat", "grep", "vim", "python3", "curl",
                                                  "tar", "ps", "git", "less", "wc", "sort"};
    const auto& cmd = cmds[zipf(cmds.size())];
    if (cmd == "vim") {
      auto p = spawn(sh, "/usr/bin/vim");
      const auto d = doc(u);
      emit(p, EdgeOp::Read, d);
      const auto swp = file(d.name + ".swp");
      emit(p, EdgeOp::Create, swp);
      emit(p, EdgeOp::Write, swp);
      emit(p, EdgeOp::Write, d);
      emit(p, EdgeOp::Delete, swp);
      return;
    }
    if (cmd == "python3") {
      auto p = spawn(sh, "/usr/bin/python3");
      emit(p, EdgeOp::Read, file(home(u) + "/scripts/job" + std::to_string(pick(3)) + ".py"));
      emit(p, EdgeOp::Load, lib());
      emit(p, EdgeOp::Read, doc(u));
      if (coin(0.4)) {
        const auto db = net("10.0.0.5", 3306);
        emit(p, EdgeOp::Connect, db);
        emit(p, EdgeOp::Send, db);
        emit(p, EdgeOp::Recv, db);
      }
      emit(p, EdgeOp::Write, file(home(u) + "/out/result" + std::to_string(pick(4)) + ".csv"));
      return;
    }
    if (cmd == "curl") {
      auto p = spawn(sh, "/usr/bin/curl");
      emit(p, EdgeOp::Load, file("/usr/lib/x86_64-linux-gnu/libcurl.so.4"));
      emit(p, EdgeOp::Read, file("/etc/resolv.conf"));
      const auto s = site(7);
      emit(p, EdgeOp::Connect, s);
      emit(p, EdgeOp::Send, s);
      emit(p, EdgeOp::Recv, s);
      emit(p, EdgeOp::Write, file(home(u) + "/downloads/file" + std::to_string(pick(8)) + ".pdf"));
      return;
    }
    if (cmd == "tar") {
      auto p = spawn(sh, "/usr/bin/tar");
      for (int i = 0; i < 3; ++i) emit(p, EdgeOp::Read, doc(u));
      emit(p, EdgeOp::Write, file(home(u) + "/backup.tar"));
      return;
    }
    if (cmd == "ps") {
      auto p = spawn(sh, "/usr/bin/ps");
      for (int i = 0; i < 4; ++i) emit(p, EdgeOp::Read, file("/proc/" + std::to_string(1000 + zipf(20)) + "/stat"));
      return;
    }
    if (cmd == "git") {
      auto p = spawn(sh, "/usr/bin/git");
      emit(p, EdgeOp::Read, file(home(u) + "/src/.git/config"));
      emit(p, EdgeOp::Read, file(home(u) + "/src/main.c"));
      if (coin(0.5)) {
        const auto gh = net("140.82.112.3", 443);
        emit(p, EdgeOp::Connect, gh);
        emit(p, EdgeOp::Send, gh);
        emit(p, EdgeOp::Recv, gh);
      }
      emit(p, EdgeOp::Write, file(home(u) + "/src/.git/index"));
      return;
    }
    // simple readers
    auto p = spawn(sh, "/usr/bin/" + cmd);
    const int n = cmd == "grep" ? 3 : cmd == "ls" ? 2 : 1;
    for (int i = 0; i < n; ++i) emit(p, EdgeOp::Read, coin(0.8) ? doc(u) : cfg());
  }

  void web_request() {
    const auto c = net(public_ip(zipf(spec_.web_clients), 99), 443);
    emit(nginx_, EdgeOp::Recv, c);
    emit(nginx_, EdgeOp::Read, file("/var/www/html/page" + std::to_string(zipf(15)) + ".html"));
    emit(nginx_, EdgeOp::Send, c);
    emit(nginx_, EdgeOp::Write, file("/var/log/nginx/access.log"));
    if (coin(0.25)) {
      const auto db = net("10.0.0.5", 3306);
      emit(nginx_, EdgeOp::Send, db);
      emit(nginx_, EdgeOp::Recv, db);
    }
  }

  void database() {
    const auto peer = net("10.0.0." + std::to_string(20 + pick(4)), 3306);
    emit(mysqld_, EdgeOp::Recv, peer);
    emit(mysqld_, EdgeOp::Read, file("/var/lib/mysql/ibdata1"));
    if (coin(0.4)) emit(mysqld_, EdgeOp::Write, file("/var/lib/mysql/ibdata1"));
    emit(mysqld_, EdgeOp::Send, peer);
  }

  void logging() {
    const auto lo = net("127.0.0.1", 514);
    emit(rsyslogd_, EdgeOp::Recv, lo);
    emit(rsyslogd_, EdgeOp::Write, file(coin(0.7) ? "/var/log/syslog" : "/var/log/auth.log"));
    if (coin(0.3)) emit(journald_, EdgeOp::Write, file("/var/log/journal/system.journal"));
  }

  void cron_job() {
    emit(cron_, EdgeOp::Read, file("/etc/crontab"));
    auto sh = spawn(cron_, "/bin/sh");
    switch (pick(3)) {
      case 0: {
        auto gz = spawn(sh, "/usr/bin/gzip");
        const auto log = std::string(coin(0.5) ? "/var/log/syslog" : "/var/log/nginx/access.log");
        emit(gz, EdgeOp::Read, file(log));
        emit(gz, EdgeOp::Create, file(log + ".1.gz"));
        emit(gz, EdgeOp::Write, file(log + ".1.gz"));
        break;
      }
      case 1: {
        auto tar = spawn(sh, "/usr/bin/tar");
        for (int i = 0; i < 3; ++i) emit(tar, EdgeOp::Read, cfg());
        emit(tar, EdgeOp::Write, file("/var/backups/etc.tar"));
        auto scp = spawn(sh, "/usr/bin/scp");
        emit(scp, EdgeOp::Read, file("/var/backups/etc.tar"));
        const auto nas = net("10.0.0.9", 22);
        emit(scp, EdgeOp::Connect, nas);
        emit(scp, EdgeOp::Send, nas);
        break;
      }
      default: {
        auto up = spawn(sh, "/usr/bin/apt-check");
        emit(up, EdgeOp::Read, file("/etc/apt/sources.list"));
        const auto mirror = net("91.189.91.39", 80);
        emit(up, EdgeOp::Connect, mirror);
        emit(up, EdgeOp::Recv, mirror);
        emit(up, EdgeOp::Write, file("/var/lib/apt/lists/archive_ubuntu_dists"));
        break;
      }
    }
  }

  void ssh_session() {
    const std::size_t u = pick(users_.size());
    const auto admin = net("10.0.0." + std::to_string(30 + pick(3)), 22);
    emit(sshd_, EdgeOp::Recv, admin);
    emit(sshd_, EdgeOp::Read, file("/etc/ssh/sshd_config"));
    auto sh = spawn(sshd_, "/usr/bin/bash");
    emit(sh, EdgeOp::Read, file(home(u) + "/.bashrc"));
    const int n = 1 + int(pick(3));
    for (int i = 0; i < n; ++i) shell_command(sh, u);
    emit(sh, EdgeOp::Write, file(home(u) + "/.bash_history"));
    emit(sshd_, EdgeOp::Send, admin);
  }

  void edit(std::size_t u) {
    const auto& e = editors_[u];
    const auto d = doc(u);
    emit(e, EdgeOp::Read, d);
    if (coin(0.5)) emit(e, EdgeOp::Write, d);
    if (coin(0.1)) emit(e, EdgeOp::Read, file(home(u) + "/.config/editor/settings.json"));
  }

  void update_check() {
    auto gup = spawn(editors_[0], "/opt/notepad++/updater/gup.exe");
    const auto srv = net("104.21.31.140", 443);
    emit(gup, EdgeOp::Connect, srv);
    emit(gup, EdgeOp::Send, srv);
    emit(gup, EdgeOp::Recv, srv);
    emit(gup, EdgeOp::Write, file("/opt/notepad++/updater/getDownloadUrl.xml"));
    emit(gup, EdgeOp::Read, file("/opt/notepad++/updater/getDownloadUrl.xml"));
  }

  void build(std::size_t u) {
    auto make = spawn(shells_[u], "/usr/bin/make");
    emit(make, EdgeOp::Read, file(home(u) + "/src/Makefile"));
    auto cc = spawn(make, "/usr/bin/gcc");
    emit(cc, EdgeOp::Read, file(home(u) + "/src/main.c"));
    const auto obj = file("/tmp/cc" + std::to_string(pick(6)) + ".o");
    emit(cc, EdgeOp::Write, obj);
    emit(cc, EdgeOp::Read, obj);
    emit(cc, EdgeOp::Write, file(home(u) + "/src/app"));
  }

  // -- campaigns

  struct Script {
    int campaign;
    std::int64_t t;
    std::vector<AuditEvent> evs;
    Script(int c, std::int64_t t0) : campaign(c), t(t0) {}
    void at(std::int64_t delay, const Entity& s, EdgeOp op, const Entity& o) {
      t += delay;
      evs.push_back(make(t, s, op, o));
      if (op == EdgeOp::Fork) {
        t += 5;
        evs.push_back(make(t, o, EdgeOp::Load, file("/usr/lib/x86_64-linux-gnu/libc.so.6")));
      }
    }
  };

  void schedule(Script& s) {
    for (auto& e : s.evs) pending_.push({e.ts, seq_++, e, s.campaign});
  }

  void schedule_campaign(int c) {
    const auto& name = spec_.campaigns[std::size_t(c)];
    Script s(c, now_ + 1000);
    if (name == "upgrade-hijack") upgrade_hijack(s);
    else if (name == "shell-recon-exfil") recon_exfil(s);
    else credential_theft(s);
    schedule(s);
  }

  void upgrade_hijack(Script& s) {
    auto& iocs = iocs_[std::size_t(s.campaign)];
    const auto& npp = editors_[0];
    auto gup = new_proc("/opt/notepad++/updater/gup.exe");
    const auto hijacked = net("45.76.12.34", 443);
    const auto dropped = file("/tmp/npp_update/npp.8.4.exe");
    auto implant = new_proc("/tmp/npp_update/npp.8.4.exe");
    const auto c2 = net("185.220.101.7", 8443);
    auto sh = new_proc("/bin/sh");
    s.at(0, npp, EdgeOp::Fork, gup);
    s.at(200, gup, EdgeOp::Connect, hijacked);
    s.at(50, gup, EdgeOp::Send, hijacked);
    s.at(300, gup, EdgeOp::Recv, hijacked);
    s.at(100, gup, EdgeOp::Create, dropped);
    s.at(20, gup, EdgeOp::Write, dropped);
    s.at(500, gup, EdgeOp::Fork, implant);
    s.at(30, implant, EdgeOp::Read, dropped);
    s.at(30, implant, EdgeOp::Load, file("/usr/lib/x86_64-linux-gnu/libcrypto.so.3"));
    s.at(4000, implant, EdgeOp::Connect, c2);
    s.at(100, implant, EdgeOp::Send, c2);
    s.at(900, implant, EdgeOp::Recv, c2);
    s.at(2000, implant, EdgeOp::Write, file("/usr/bin/nppd"));
    s.at(3000, implant, EdgeOp::Fork, sh);
    for (const char* tool : {"/usr/bin/whoami", "/usr/bin/hostname", "/usr/bin/uname"}) {
      auto t = new_proc(tool);
      s.at(700, sh, EdgeOp::Fork, t);
      s.at(20, t, EdgeOp::Read, file("/etc/hostname"));
    }
    s.at(800, sh, EdgeOp::Read, file("/etc/passwd"));
    s.at(1500, implant, EdgeOp::Send, c2);
    iocs.push_back(make_pattern("*", "connect", "45.76.12.34"));
    iocs.push_back(make_pattern("*", "*", "npp.8.4.exe"));
    iocs.push_back(make_pattern("*", "connect", "185.220.101.7"));
  }

  void recon_exfil(Script& s) {
    auto& iocs = iocs_[std::size_t(s.campaign)];
    const auto intruder = net("91.219.236.18", 22);
    const auto home_dir = home(users_.size() > 1 ? 1 : 0);
    auto sh = new_proc("/usr/bin/bash");
    s.at(0, sshd_, EdgeOp::Recv, intruder);
    s.at(100, sshd_, EdgeOp::Fork, sh);
    s.at(100, sh, EdgeOp::Read, file(home_dir + "/.bashrc"));
    auto uname = new_proc("/usr/bin/uname");
    s.at(3000, sh, EdgeOp::Fork, uname);
    s.at(20, uname, EdgeOp::Read, file("/proc/version"));
    auto id = new_proc("/usr/bin/id");
    s.at(2500, sh, EdgeOp::Fork, id);
    s.at(20, id, EdgeOp::Read, file("/etc/group"));
    auto ns = new_proc("/usr/bin/netstat");
    s.at(4000, sh, EdgeOp::Fork, ns);
    s.at(20, ns, EdgeOp::Read, file("/proc/net/tcp"));
    auto find = new_proc("/usr/bin/find");
    s.at(5000, sh, EdgeOp::Fork, find);
    std::vector<Entity> loot;
    for (int i = 0; i < 3; ++i) loot.push_back(file(home_dir + "/docs/report" + std::to_string(i) + (i % 2 ? ".pdf" : ".txt")));
    for (const auto& f : loot) s.at(40, find, EdgeOp::Read, f);
    auto tar = new_proc("/usr/bin/tar");
    const auto archive = file("/tmp/.cache/.d.tgz");
    s.at(3000, sh, EdgeOp::Fork, tar);
    for (const auto& f : loot) s.at(60, tar, EdgeOp::Read, f);
    s.at(100, tar, EdgeOp::Create, archive);
    s.at(50, tar, EdgeOp::Write, archive);
    auto curl = new_proc("/usr/bin/curl");
    const auto drop = net("91.219.236.18", 443);
    s.at(2000, sh, EdgeOp::Fork, curl);
    s.at(30, curl, EdgeOp::Read, archive);
    s.at(30, curl, EdgeOp::Connect, drop);
    s.at(200, curl, EdgeOp::Send, drop);
    auto rm = new_proc("/usr/bin/rm");
    s.at(1500, sh, EdgeOp::Fork, rm);
    s.at(20, rm, EdgeOp::Delete, archive);
    s.at(500, sh, EdgeOp::Write, file(home_dir + "/.bash_history"));
    iocs.push_back(make_pattern("*", "connect", "91.219.236.18"));
    iocs.push_back(make_pattern("*", "*", ".d.tgz"));
  }

  void credential_theft(Script& s) {
    auto& iocs = iocs_[std::size_t(s.campaign)];
    const std::size_t victim = users_.size() > 2 ? 2 : 0;
    const auto home_dir = home(victim);
    const auto stage = net("193.142.146.35", 80);
    const auto c2 = net("193.142.146.35", 8080);
    const auto kit = file("/tmp/.X11-unix/kit.so");
    const auto loot = file("/var/tmp/.c");
    // the user runs a trojanized helper script from the interactive shell
    auto sh = new_proc("/bin/sh");
    s.at(0, shells_[victim], EdgeOp::Fork, sh);
    s.at(50, sh, EdgeOp::Read, file(home_dir + "/downloads/setup-helper.sh"));
    auto wget = new_proc("/usr/bin/wget");
    s.at(800, sh, EdgeOp::Fork, wget);
    s.at(40, wget, EdgeOp::Connect, stage);
    s.at(300, wget, EdgeOp::Recv, stage);
    s.at(60, wget, EdgeOp::Create, kit);
    s.at(20, wget, EdgeOp::Write, kit);
    auto py = new_proc("/usr/bin/python3");
    s.at(2000, sh, EdgeOp::Fork, py);
    s.at(40, py, EdgeOp::Load, kit);
    s.at(500, py, EdgeOp::Read, file("/etc/shadow"));
    s.at(300, py, EdgeOp::Read, file(home_dir + "/.ssh/id_rsa"));
    s.at(100, py, EdgeOp::Create, loot);
    s.at(40, py, EdgeOp::Write, loot);
    s.at(2000, py, EdgeOp::Connect, c2);
    s.at(60, py, EdgeOp::Read, loot);
    s.at(60, py, EdgeOp::Send, c2);
    s.at(1000, sh, EdgeOp::Write, file("/etc/crontab"));
    iocs.push_back(make_pattern("*", "connect", "193.142.146.35"));
    iocs.push_back(make_pattern("*", "*", "kit.so"));
  }
};

}  // namespace

Scenario generate_scenario(const ScenarioSpec& spec, const AbstractionRules& rules) {
  spec.validate();
  Generator gen(spec, rules);
  return gen.run();
}

AttrGraph graph_from_events(const std::vector<AuditEvent>& events, const AbstractionRules& rules) {
  AttrGraph g;
  std::map<std::pair<std::string, AbsType>, std::uint32_t> by_key;
  std::map<std::string, std::uint32_t> by_id;
  auto node = [&](const std::string& id, const std::string& name, EntityKind kind, std::optional<Ipv4> addr) {
    if (const auto it = by_id.find(id); it != by_id.end()) return it->second;
    const auto abs = rules.abstract_node(kind, name, addr);
    auto [it, fresh] = by_key.try_emplace({normalized_name(kind, name), abs}, std::uint32_t(g.nodes.size()));
    if (fresh) g.nodes.push_back({name, abs});
    by_id[id] = it->second;
    return it->second;
  };
  for (const auto& e : events) {
    const auto s = node(e.sbj_id, e.sbj_name, EntityKind::Process, std::nullopt);
    const auto o = node(e.obj_id, e.obj_name, e.obj_kind, e.obj_addr);
    g.edges.push_back({s, o, e.op, e.ts});
  }
  g.normalize_edges();
  return g;
}

namespace {

nlohmann::json pattern_json(const PoiPattern& p) { return {{"sbj", p.sbj}, {"op", p.op}, {"obj", p.obj}}; }

}  // namespace

nlohmann::json labels_to_json(const Scenario& s) {
  nlohmann::json cs = nlohmann::json::array();
  std::vector<std::size_t> all;
  for (const auto& c : s.campaigns) {
    nlohmann::json iocs = nlohmann::json::array();
    for (const auto& p : c.iocs) iocs.push_back(pattern_json(p));
    cs.push_back({{"name", c.name},
                  {"events", c.events},
                  {"entities", c.entities},
                  {"attack_only", c.attack_only},
                  {"iocs", iocs}});
    all.insert(all.end(), c.events.begin(), c.events.end());
  }
  std::sort(all.begin(), all.end());
  return {{"seed", s.spec.seed}, {"event_count", s.events.size()}, {"attack_events", all}, {"campaigns", cs}};
}

std::vector<CampaignTruth> campaigns_from_labels(const nlohmann::json& j) {
  try {
    std::vector<CampaignTruth> out;
    for (const auto& c : j.at("campaigns")) {
      CampaignTruth t;
      t.name = c.at("name").get<std::string>();
      t.events = c.at("events").get<std::vector<std::size_t>>();
      t.entities = c.at("entities").get<std::vector<std::string>>();
      t.attack_only = c.at("attack_only").get<std::vector<std::string>>();
      t.iocs = patterns_from_json(c.at("iocs"));
      out.push_back(std::move(t));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error("bench", std::string("bad labels json: ") + e.what());
  }
}

void write_scenario(const Scenario& s, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "queries");
  auto open = [](const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw Error("bench", "cannot write " + p.string());
    return f;
  };
  {
    auto f = open(fs::path(dir) / "events.jsonl");
    for (const auto& e : s.events) f << event_to_json_line(e) << '\n';
  }
  open(fs::path(dir) / "labels.json") << labels_to_json(s).dump(2) << '\n';
  nlohmann::json pats = nlohmann::json::array();
  for (const auto& p : s.all_iocs()) pats.push_back(pattern_json(p));
  open(fs::path(dir) / "patterns.json") << pats.dump(2) << '\n';
  for (const auto& c : s.campaigns) save_graph(c.query, (fs::path(dir) / "queries" / (c.name + ".json")).string());
}

}  // namespace provhunt
