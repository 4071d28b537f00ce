#include "netroot/fsmodel.hpp"

#include <algorithm>
#include <deque>
#include <regex>
#include <sstream>

namespace netroot::fs {

std::string_view to_string(FsErrc code)
{
    switch (code) {
    case FsErrc::not_found: return "NotFound";
    case FsErrc::not_a_directory: return "NotADirectory";
    case FsErrc::is_a_directory: return "IsADirectory";
    case FsErrc::exists: return "Exists";
    case FsErrc::not_empty: return "NotEmpty";
    case FsErrc::read_only: return "EROFS";
    case FsErrc::no_space: return "ENOSPC";
    case FsErrc::mount_point_missing: return "MountPointMissing";
    case FsErrc::already_mounted: return "AlreadyMounted";
    case FsErrc::export_unknown: return "ExportUnknown";
    case FsErrc::busy: return "Busy";
    case FsErrc::loop_detected: return "LoopDetected";
    case FsErrc::invalid_path: return "InvalidPath";
    }
    return "Unknown";
}

FsError::FsError(FsErrc code, std::string path)
    : std::runtime_error(std::string(to_string(code)) + ": " + path),
      code_(code),
      path_(std::move(path))
{
}

std::string_view to_string(NodeKind kind)
{
    switch (kind) {
    case NodeKind::dir: return "dir";
    case NodeKind::file: return "file";
    case NodeKind::socket: return "socket";
    case NodeKind::device: return "device";
    case NodeKind::symlink: return "symlink";
    }
    return "?";
}

std::string_view to_string(MountKind kind)
{
    switch (kind) {
    case MountKind::nfs: return "nfs";
    case MountKind::mfs: return "mfs";
    case MountKind::union_mfs: return "union-mfs";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// FsNode

FsNode::FsNode(NodeKind kind, std::string name, std::uint16_t mode, Uid owner)
    : kind_(kind), name_(std::move(name)), mode_(mode & mode_mask), owner_(owner)
{
    if (name_.find('/') != std::string::npos)
        throw FsError(FsErrc::invalid_path, name_);
}

FsNode::FsNode(const FsNode& other)
    : kind_(other.kind_),
      name_(other.name_),
      mode_(other.mode_),
      owner_(other.owner_),
      content_(other.content_)
{
    for (const auto& [name, child] : other.children_)
        children_.emplace(name, std::make_unique<FsNode>(*child));
}

FsNode& FsNode::operator=(const FsNode& other)
{
    if (this != &other) {
        FsNode copy(other);
        *this = std::move(copy);
    }
    return *this;
}

FsNode* FsNode::child(std::string_view name)
{
    auto it = children_.find(name);
    return it == children_.end() ? nullptr : it->second.get();
}

const FsNode* FsNode::child(std::string_view name) const
{
    auto it = children_.find(name);
    return it == children_.end() ? nullptr : it->second.get();
}

FsNode& FsNode::put_child(FsNode node)
{
    if (!is_dir())
        throw FsError(FsErrc::not_a_directory, name_);
    auto key = node.name_;
    auto& slot = children_[key];
    slot = std::make_unique<FsNode>(std::move(node));
    return *slot;
}

bool FsNode::erase_child(std::string_view name)
{
    auto it = children_.find(name);
    if (it == children_.end())
        return false;
    children_.erase(it);
    return true;
}

std::vector<std::string> FsNode::child_names() const
{
    std::vector<std::string> names;
    names.reserve(children_.size());
    for (const auto& [name, _] : children_)
        names.push_back(name);
    return names;
}

FsNode* FsNode::walk(std::string_view rel)
{
    return const_cast<FsNode*>(std::as_const(*this).walk(rel));
}

const FsNode* FsNode::walk(std::string_view rel) const
{
    const FsNode* cur = this;
    for (const auto& part : split_path(rel)) {
        if (!cur->is_dir())
            throw FsError(FsErrc::not_a_directory, std::string(rel));
        cur = cur->child(part);
        if (cur == nullptr)
            return nullptr;
    }
    return cur;
}

std::size_t FsNode::descendant_count() const
{
    std::size_t n = 0;
    for (const auto& [_, child] : children_)
        n += 1 + child->descendant_count();
    return n;
}

std::size_t FsNode::content_bytes() const
{
    std::size_t n = kind_ == NodeKind::file ? content_.size() : 0;
    for (const auto& [_, child] : children_)
        n += child->content_bytes();
    return n;
}

// ---------------------------------------------------------------------------
// hashing

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed)
{
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

void hash_node(const FsNode& node, std::uint64_t& h)
{
    std::ostringstream head;
    head << to_string(node.kind()) << '\0' << node.name() << '\0' << node.mode() << '\0'
         << node.owner() << '\0' << node.content().size() << '\0';
    h = fnv1a64(head.str(), h);
    h = fnv1a64(node.content(), h);
    h = fnv1a64(std::to_string(node.child_count()) + '\0', h);
    for (const auto& name : node.child_names())
        hash_node(*node.child(name), h);
}

}  // namespace

std::uint64_t content_hash(const FsNode& node)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    hash_node(node, h);
    return h;
}

std::string hex64(std::uint64_t value)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

// ---------------------------------------------------------------------------
// paths

std::vector<std::string> split_path(std::string_view path)
{
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        auto j = path.find('/', i);
        if (j == std::string_view::npos)
            j = path.size();
        if (j > i)
            parts.emplace_back(path.substr(i, j - i));
        i = j + 1;
    }
    return parts;
}

std::string join_path(const std::vector<std::string>& parts, std::size_t count)
{
    std::string out;
    for (std::size_t i = 0; i < count && i < parts.size(); ++i) {
        if (i)
            out += '/';
        out += parts[i];
    }
    return out;
}

std::string normalize_path(std::string_view path)
{
    std::vector<std::string> out;
    for (auto& part : split_path(path)) {
        if (part == ".")
            continue;
        if (part == "..") {
            if (!out.empty())
                out.pop_back();
            continue;
        }
        out.push_back(std::move(part));
    }
    return "/" + join_path(out, out.size());
}

bool is_normalized_absolute(std::string_view path)
{
    return !path.empty() && path[0] == '/' && normalize_path(path) == path;
}

std::string parent_path(std::string_view path)
{
    auto parts = split_path(path);
    if (parts.empty())
        return "/";
    return "/" + join_path(parts, parts.size() - 1);
}

std::string base_name(std::string_view path)
{
    auto parts = split_path(path);
    return parts.empty() ? std::string() : parts.back();
}

namespace {

std::string rel_parent(const std::string& rel)
{
    auto pos = rel.rfind('/');
    return pos == std::string::npos ? std::string() : rel.substr(0, pos);
}

std::string rel_join(const std::string& mount_point, const std::string& rel)
{
    if (rel.empty())
        return mount_point;
    return mount_point == "/" ? "/" + rel : mount_point + "/" + rel;
}

std::string strip_root(std::string_view path)
{
    return join_path(split_path(path), split_path(path).size());
}

}  // namespace

// ---------------------------------------------------------------------------
// NfsServer

NfsServer::NfsServer(std::string name) : name_(std::move(name)) {}

void NfsServer::add_export(const std::string& server_path, bool read_only, bool root_access)
{
    if (!is_normalized_absolute(server_path))
        throw FsError(FsErrc::invalid_path, server_path);
    const FsNode* node = tree_.walk(strip_root(server_path));
    if (node == nullptr || !node->is_dir())
        throw FsError(FsErrc::not_found, server_path);
    exports_[server_path] = Export{server_path, read_only, root_access};
}

Export* NfsServer::find_export(std::string_view server_path)
{
    auto it = exports_.find(server_path);
    return it == exports_.end() ? nullptr : &it->second;
}

const Export* NfsServer::find_export(std::string_view server_path) const
{
    auto it = exports_.find(server_path);
    return it == exports_.end() ? nullptr : &it->second;
}

FsNode& NfsServer::make_dirs(std::string_view path)
{
    FsNode* cur = &tree_;
    for (const auto& part : split_path(path)) {
        FsNode* next = cur->child(part);
        if (next == nullptr)
            next = &cur->put_child(FsNode(NodeKind::dir, part));
        else if (!next->is_dir())
            throw FsError(FsErrc::not_a_directory, std::string(path));
        cur = next;
    }
    return *cur;
}

FsNode& NfsServer::put(std::string_view path, FsNode node)
{
    if (node.name() != base_name(path))
        throw FsError(FsErrc::invalid_path, std::string(path));
    return make_dirs(parent_path(path)).put_child(std::move(node));
}

std::uint64_t NfsServer::export_hash(std::string_view server_path) const
{
    const FsNode* node = tree_.walk(strip_root(server_path));
    if (node == nullptr)
        throw FsError(FsErrc::export_unknown, std::string(server_path));
    return content_hash(*node);
}

// ---------------------------------------------------------------------------
// MfsStore

MfsStore::MfsStore(std::uint64_t capacity_bytes, std::uint64_t max_inodes, bool union_layer)
    : capacity_bytes_(capacity_bytes), max_inodes_(max_inodes), union_layer_(union_layer)
{
    // newfs gives a memory filesystem root sticky world-writable permissions.
    root_.set_mode(01777);
}

void MfsStore::add_whiteout(const std::string& rel)
{
    if (!union_layer_)
        throw FsError(FsErrc::invalid_path, rel);
    whiteouts_.insert(rel);
}

FsNode& MfsStore::create(FsNode& parent, FsNode node, const std::string& path)
{
    const std::uint64_t inodes = 1 + node.descendant_count();
    const std::uint64_t bytes = node.content_bytes();
    if (used_inodes_ + inodes > max_inodes_ || used_bytes_ + bytes > capacity_bytes_)
        throw FsError(FsErrc::no_space, path);
    FsNode& stored = parent.put_child(std::move(node));
    used_inodes_ += inodes;
    used_bytes_ += bytes;
    return stored;
}

void MfsStore::remove(FsNode& parent, std::string_view name)
{
    FsNode* child = parent.child(name);
    if (child == nullptr)
        return;
    used_inodes_ -= 1 + child->descendant_count();
    used_bytes_ -= child->content_bytes();
    parent.erase_child(name);
}

void MfsStore::replace_content(FsNode& file, std::string content, const std::string& path)
{
    const std::uint64_t old_size = file.content().size();
    if (used_bytes_ - old_size + content.size() > capacity_bytes_)
        throw FsError(FsErrc::no_space, path);
    used_bytes_ = used_bytes_ - old_size + content.size();
    file.set_content(std::move(content));
}

MfsSize mfs_size_from_options(const std::vector<std::string>& options)
{
    MfsSize size;
    for (std::string_view opt : options) {
        if (!opt.empty() && opt[0] == '-')
            opt.remove_prefix(1);
        if (opt.size() < 3 || opt[1] != '=')
            continue;
        std::uint64_t value = 0;
        try {
            value = std::stoull(std::string(opt.substr(2)));
        } catch (const std::exception&) {
            throw FsError(FsErrc::invalid_path, std::string(opt));
        }
        if (opt[0] == 's')
            size.sectors = value;
        else if (opt[0] == 'i')
            size.bytes_per_inode = value;
    }
    return size;
}

bool MountEntry::has_option(std::string_view opt) const
{
    return std::find(options.begin(), options.end(), opt) != options.end();
}

// ---------------------------------------------------------------------------
// MountTable

void MountTable::mount(MountEntry entry, NfsServer* server)
{
    if (!is_normalized_absolute(entry.mount_point))
        throw FsError(FsErrc::invalid_path, entry.mount_point);

    Slot slot;
    if (entry.kind == MountKind::nfs) {
        auto colon = entry.source.find(':');
        if (server == nullptr || colon == std::string::npos ||
            entry.source.substr(0, colon) != server->name())
            throw FsError(FsErrc::export_unknown, entry.source);
        slot.export_path = entry.source.substr(colon + 1);
        if (server->find_export(slot.export_path) == nullptr)
            throw FsError(FsErrc::export_unknown, entry.source);
        slot.server = server;
    } else {
        auto size = mfs_size_from_options(entry.options);
        slot.store = std::make_unique<MfsStore>(size.capacity_bytes(), size.max_inodes(),
                                                entry.kind == MountKind::union_mfs);
    }

    if (entries_.empty()) {
        if (entry.mount_point != "/" || entry.kind == MountKind::union_mfs)
            throw FsError(FsErrc::mount_point_missing, entry.mount_point);
    } else {
        std::optional<Found> target;
        try {
            target = lookup(canonical(entry.mount_point), entries_.size());
        } catch (const FsError&) {
            target.reset();
        }
        if (!target || !target->node->is_dir())
            throw FsError(FsErrc::mount_point_missing, entry.mount_point);
        if (entry.kind != MountKind::union_mfs && is_mounted(entry.mount_point))
            throw FsError(FsErrc::already_mounted, entry.mount_point);
    }

    slot.entry = std::move(entry);
    entries_.push_back(std::move(slot));
}

void MountTable::unmount(std::string_view mount_point)
{
    for (std::size_t i = entries_.size(); i-- > 0;) {
        if (entries_[i].entry.mount_point != mount_point)
            continue;
        const std::string prefix = mount_point == "/" ? "/" : std::string(mount_point) + "/";
        for (std::size_t j = 0; j < entries_.size(); ++j) {
            const auto& mp = entries_[j].entry.mount_point;
            if (j != i && mp != mount_point && mp.compare(0, prefix.size(), prefix) == 0)
                throw FsError(FsErrc::busy, std::string(mount_point));
        }
        entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
        return;
    }
    throw FsError(FsErrc::not_found, std::string(mount_point));
}

void MountTable::clear()
{
    entries_.clear();
}

void MountTable::remount(std::string_view mount_point, std::vector<std::string> options)
{
    for (std::size_t i = entries_.size(); i-- > 0;) {
        if (entries_[i].entry.mount_point == mount_point) {
            entries_[i].entry.options = std::move(options);
            return;
        }
    }
    throw FsError(FsErrc::not_found, std::string(mount_point));
}

std::vector<MountEntry> MountTable::entries() const
{
    std::vector<MountEntry> out;
    out.reserve(entries_.size());
    for (const auto& slot : entries_)
        out.push_back(slot.entry);
    return out;
}

bool MountTable::is_mounted(std::string_view mount_point) const
{
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const Slot& s) { return s.entry.mount_point == mount_point; });
}

std::size_t MountTable::owner_below(std::string_view path, std::size_t limit) const
{
    std::optional<std::size_t> best;
    std::size_t best_len = 0;
    for (std::size_t i = 0; i < limit && i < entries_.size(); ++i) {
        const auto& mp = entries_[i].entry.mount_point;
        const bool match = mp == "/" || path == mp ||
                           (path.size() > mp.size() && path.compare(0, mp.size(), mp) == 0 &&
                            path[mp.size()] == '/');
        if (match && (!best || mp.size() >= best_len)) {
            best = i;
            best_len = mp.size();
        }
    }
    if (!best)
        throw FsError(FsErrc::not_found, std::string(path));
    return *best;
}

std::size_t MountTable::owner_of(std::string_view path) const
{
    return owner_below(canonical(path, false), entries_.size());
}

std::string MountTable::rel_of(const std::string& mount_point, std::string_view path)
{
    if (mount_point == "/")
        return std::string(path.substr(1));
    if (path.size() == mount_point.size())
        return {};
    return std::string(path.substr(mount_point.size() + 1));
}

std::optional<MountTable::Found> MountTable::lookup(std::string_view path, std::size_t limit) const
{
    std::size_t slot = 0;
    try {
        slot = owner_below(path, limit);
    } catch (const FsError&) {
        return std::nullopt;
    }
    return lookup_in(slot, rel_of(entries_[slot].entry.mount_point, path));
}

std::optional<MountTable::Found> MountTable::lookup_in(std::size_t index, const std::string& rel) const
{
    const Slot& slot = entries_[index];
    switch (slot.entry.kind) {
    case MountKind::nfs: {
        FsNode* base = slot.server->tree().walk(strip_root(slot.export_path));
        if (base == nullptr)
            return std::nullopt;
        FsNode* node = base->walk(rel);
        if (node == nullptr)
            return std::nullopt;
        return Found{node, index, true};
    }
    case MountKind::mfs: {
        FsNode* node = slot.store->root().walk(rel);
        if (node == nullptr)
            return std::nullopt;
        return Found{node, index, true};
    }
    case MountKind::union_mfs:
        break;
    }

    // Union: decide visibility one component at a time. The upper layer
    // shadows; a whiteout hides the lower name; otherwise the lower layer
    // (everything mounted before this entry) shows through.
    auto parts = split_path(rel);
    Found cur{&slot.store->root(), index, true};
    for (std::size_t i = 1; i <= parts.size(); ++i) {
        if (!cur.node->is_dir())
            throw FsError(FsErrc::not_a_directory, rel_join(slot.entry.mount_point, rel));
        const std::string prefix = join_path(parts, i);
        FsNode* upper = nullptr;
        try {
            upper = slot.store->root().walk(prefix);
        } catch (const FsError&) {
            upper = nullptr;
        }
        if (upper != nullptr) {
            cur = Found{upper, index, true};
            continue;
        }
        if (slot.store->whited_out(prefix))
            return std::nullopt;
        std::optional<Found> lower;
        try {
            lower = lookup(rel_join(slot.entry.mount_point, prefix), index);
        } catch (const FsError&) {
            lower.reset();
        }
        if (!lower)
            return std::nullopt;
        cur = Found{lower->node, index, false};
    }
    return cur;
}

std::string MountTable::canonical(std::string_view path, bool follow_last) const
{
    if (path.empty() || path[0] != '/')
        throw FsError(FsErrc::invalid_path, std::string(path));

    std::deque<std::string> pending;
    for (auto& part : split_path(path))
        pending.push_back(std::move(part));

    std::vector<std::string> out;
    int links = 0;
    while (!pending.empty()) {
        std::string part = std::move(pending.front());
        pending.pop_front();
        if (part == ".")
            continue;
        if (part == "..") {
            if (!out.empty())
                out.pop_back();
            continue;
        }
        out.push_back(std::move(part));
        if (pending.empty() && !follow_last)
            break;

        std::optional<Found> found;
        try {
            found = lookup("/" + join_path(out, out.size()), entries_.size());
        } catch (const FsError&) {
            found.reset();
        }
        if (!found || found->node->kind() != NodeKind::symlink)
            continue;
        if (++links > 32)
            throw FsError(FsErrc::loop_detected, std::string(path));
        const std::string& target = found->node->content();
        out.pop_back();
        if (!target.empty() && target[0] == '/')
            out.clear();
        auto target_parts = split_path(target);
        pending.insert(pending.begin(), target_parts.begin(), target_parts.end());
    }
    return "/" + join_path(out, out.size());
}

MountTable::Found MountTable::require(std::string_view path) const
{
    auto canon = canonical(path);
    auto found = lookup(canon, entries_.size());
    if (!found)
        throw FsError(FsErrc::not_found, canon);
    return *found;
}

bool MountTable::exists(std::string_view path) const
{
    try {
        return lookup(canonical(path), entries_.size()).has_value();
    } catch (const FsError&) {
        return false;
    }
}

namespace {

NodeInfo info_of(const FsNode& node)
{
    return NodeInfo{node.kind(), node.mode(), node.owner(),
                    node.kind() == NodeKind::file ? node.content().size() : 0};
}

}  // namespace

NodeInfo MountTable::stat(std::string_view path) const
{
    return info_of(*require(path).node);
}

NodeInfo MountTable::lstat(std::string_view path) const
{
    auto canon = canonical(path, false);
    auto found = lookup(canon, entries_.size());
    if (!found)
        throw FsError(FsErrc::not_found, canon);
    return info_of(*found->node);
}

std::string MountTable::read_file(std::string_view path) const
{
    const FsNode* node = require(path).node;
    if (node->is_dir())
        throw FsError(FsErrc::is_a_directory, std::string(path));
    return node->content();
}

std::string MountTable::read_link(std::string_view path) const
{
    auto canon = canonical(path, false);
    auto found = lookup(canon, entries_.size());
    if (!found)
        throw FsError(FsErrc::not_found, canon);
    if (found->node->kind() != NodeKind::symlink)
        throw FsError(FsErrc::invalid_path, canon);
    return found->node->content();
}

std::vector<std::string> MountTable::list(std::string_view path) const
{
    const auto canon = canonical(path);
    Found found = require(canon);
    if (!found.node->is_dir())
        throw FsError(FsErrc::not_a_directory, canon);

    const std::size_t index = owner_below(canon, entries_.size());
    const Slot& slot = entries_[index];
    if (slot.entry.kind != MountKind::union_mfs)
        return found.node->child_names();

    const std::string rel = rel_of(slot.entry.mount_point, canon);
    std::set<std::string> candidates;
    try {
        if (const FsNode* upper = slot.store->root().walk(rel); upper && upper->is_dir())
            for (auto& name : upper->child_names())
                candidates.insert(std::move(name));
    } catch (const FsError&) {
    }
    try {
        if (auto lower = lookup(canon, index); lower && lower->node->is_dir())
            for (auto& name : lower->node->child_names())
                candidates.insert(std::move(name));
    } catch (const FsError&) {
    }

    std::vector<std::string> names;
    for (const auto& name : candidates) {
        const std::string child_rel = rel.empty() ? name : rel + "/" + name;
        if (lookup_in(index, child_rel))
            names.push_back(name);
    }
    return names;
}

bool MountTable::slot_writable(std::size_t index) const
{
    const Slot& slot = entries_[index];
    if (slot.entry.has_option("ro"))
        return false;
    if (slot.entry.kind == MountKind::nfs) {
        const Export* exp = slot.server->find_export(slot.export_path);
        return exp != nullptr && !exp->read_only;
    }
    return true;
}

bool MountTable::writable(std::string_view path) const
{
    return slot_writable(owner_of(path));
}

void MountTable::check_writable(std::size_t index, std::string_view op, std::string_view path)
{
    if (slot_writable(index))
        return;
    violations_.push_back(
        RoViolation{std::string(op), std::string(path), entries_[index].entry.mount_point});
    throw FsError(FsErrc::read_only, std::string(path));
}

FsNode& MountTable::copy_up(std::size_t index, const std::string& path, const std::string& rel)
{
    Slot& slot = entries_[index];
    if (rel.empty())
        return slot.store->root();
    if (FsNode* existing = slot.store->root().walk(rel))
        return *existing;

    FsNode& parent = copy_up(index, parent_path(path), rel_parent(rel));
    auto visible = lookup_in(index, rel);
    if (!visible)
        throw FsError(FsErrc::not_found, path);

    const FsNode& src = *visible->node;
    FsNode copy(src.kind(), src.name(), src.mode(), src.owner());
    if (!src.is_dir())
        copy.set_content(src.content());
    return slot.store->create(parent, std::move(copy), path);
}

FsNode& MountTable::writable_parent(std::size_t index, const std::string& path, const std::string& rel)
{
    Slot& slot = entries_[index];
    const std::string parent_rel = rel_parent(rel);
    FsNode* parent = nullptr;
    switch (slot.entry.kind) {
    case MountKind::nfs:
        parent = slot.server->tree().walk(strip_root(slot.export_path))->walk(parent_rel);
        break;
    case MountKind::mfs:
        parent = slot.store->root().walk(parent_rel);
        break;
    case MountKind::union_mfs:
        parent = &copy_up(index, parent_path(path), parent_rel);
        break;
    }
    if (parent == nullptr)
        throw FsError(FsErrc::not_found, parent_path(path));
    if (!parent->is_dir())
        throw FsError(FsErrc::not_a_directory, parent_path(path));
    return *parent;
}

void MountTable::create_node(std::string_view raw_path, FsNode node)
{
    const std::string path = canonical(raw_path, false);
    if (path == "/")
        throw FsError(FsErrc::exists, path);
    const std::string parent = parent_path(path);
    auto parent_found = lookup(parent, entries_.size());
    if (!parent_found)
        throw FsError(FsErrc::not_found, parent);
    if (!parent_found->node->is_dir())
        throw FsError(FsErrc::not_a_directory, parent);
    if (lookup(path, entries_.size()))
        throw FsError(FsErrc::exists, path);

    const std::size_t index = owner_below(path, entries_.size());
    check_writable(index, "create", path);
    Slot& slot = entries_[index];
    const std::string rel = rel_of(slot.entry.mount_point, path);
    FsNode& dir = writable_parent(index, path, rel);
    if (slot.store) {
        slot.store->create(dir, std::move(node), path);
        if (slot.store->union_layer())
            slot.store->clear_whiteout(rel);
    } else {
        dir.put_child(std::move(node));
    }
}

void MountTable::write_file(std::string_view raw_path, std::string bytes, Uid uid)
{
    const std::string path = canonical(raw_path);
    auto found = lookup(path, entries_.size());
    if (!found) {
        FsNode file(NodeKind::file, base_name(path), 0644, uid);
        file.set_content(std::move(bytes));
        create_node(path, std::move(file));
        return;
    }
    if (found->node->is_dir())
        throw FsError(FsErrc::is_a_directory, path);

    const std::size_t index = owner_below(path, entries_.size());
    check_writable(index, "write", path);
    Slot& slot = entries_[index];
    FsNode* target = found->node;
    if (slot.entry.kind == MountKind::union_mfs && !found->upper)
        target = &copy_up(index, path, rel_of(slot.entry.mount_point, path));
    if (slot.store)
        slot.store->replace_content(*target, std::move(bytes), path);
    else
        target->set_content(std::move(bytes));
}

void MountTable::mkdir(std::string_view path, std::uint16_t mode, Uid uid)
{
    create_node(path, FsNode(NodeKind::dir, base_name(normalize_path(path)), mode, uid));
}

void MountTable::mknod(std::string_view path, std::uint16_t mode, Uid uid)
{
    create_node(path, FsNode(NodeKind::device, base_name(normalize_path(path)), mode, uid));
}

void MountTable::mksock(std::string_view path, std::uint16_t mode, Uid uid)
{
    create_node(path, FsNode(NodeKind::socket, base_name(normalize_path(path)), mode, uid));
}

void MountTable::symlink(std::string_view path, std::string target, Uid uid)
{
    FsNode link(NodeKind::symlink, base_name(normalize_path(path)), 0755, uid);
    link.set_content(std::move(target));
    create_node(path, std::move(link));
}

void MountTable::chmod(std::string_view raw_path, std::uint16_t mode)
{
    const std::string path = canonical(raw_path);
    Found found = require(path);
    const std::size_t index = owner_below(path, entries_.size());
    check_writable(index, "chmod", path);
    FsNode* target = found.node;
    Slot& slot = entries_[index];
    if (slot.entry.kind == MountKind::union_mfs && !found.upper)
        target = &copy_up(index, path, rel_of(slot.entry.mount_point, path));
    target->set_mode(mode);
}

void MountTable::chown(std::string_view raw_path, Uid uid)
{
    const std::string path = canonical(raw_path);
    Found found = require(path);
    const std::size_t index = owner_below(path, entries_.size());
    check_writable(index, "chown", path);
    FsNode* target = found.node;
    Slot& slot = entries_[index];
    if (slot.entry.kind == MountKind::union_mfs && !found.upper)
        target = &copy_up(index, path, rel_of(slot.entry.mount_point, path));
    target->set_owner(uid);
}

void MountTable::unlink(std::string_view raw_path)
{
    const std::string path = canonical(raw_path, false);
    const std::size_t index = owner_below(path, entries_.size());
    Slot& slot = entries_[index];
    const std::string rel = rel_of(slot.entry.mount_point, path);
    if (rel.empty())
        throw FsError(FsErrc::busy, path);
    auto found = lookup(path, entries_.size());
    if (!found)
        throw FsError(FsErrc::not_found, path);
    if (found->node->is_dir() && !list(path).empty())
        throw FsError(FsErrc::not_empty, path);
    check_writable(index, "unlink", path);

    const std::string name = base_name(path);
    switch (slot.entry.kind) {
    case MountKind::nfs:
        writable_parent(index, path, rel).erase_child(name);
        break;
    case MountKind::mfs:
        slot.store->remove(*slot.store->root().walk(rel_parent(rel)), name);
        break;
    case MountKind::union_mfs: {
        if (found->upper)
            slot.store->remove(*slot.store->root().walk(rel_parent(rel)), name);
        std::optional<Found> lower;
        try {
            lower = lookup(path, index);
        } catch (const FsError&) {
            lower.reset();
        }
        if (lower)
            slot.store->add_whiteout(rel);
        break;
    }
    }
}

// ---------------------------------------------------------------------------
// rendering

std::string render_mount_line(const MountEntry& entry)
{
    std::string source = entry.source;
    std::string flags;
    if (entry.kind == MountKind::nfs) {
        if (entry.has_option("ro"))
            flags = "read-only";
    } else {
        source = "mfs:" + std::to_string(entry.mfs_id.value_or(0));
        flags = "asynchronous, local";
        if (entry.kind == MountKind::union_mfs)
            flags += ", union";
    }
    std::string line = source + " on " + entry.mount_point + " type " +
                       (entry.kind == MountKind::nfs ? "nfs" : "mfs");
    if (!flags.empty())
        line += " (" + flags + ")";
    return line;
}

std::string render_mount_table(const MountTable& table)
{
    std::string out;
    for (std::size_t i = 0; i < table.size(); ++i)
        out += render_mount_line(table.entry(i)) + "\n";
    return out;
}

std::string normalize_mfs_ids(std::string_view text)
{
    static const std::regex id_re("mfs:[0-9]+");
    return std::regex_replace(std::string(text), id_re, "mfs:*");
}

}  // namespace netroot::fs
