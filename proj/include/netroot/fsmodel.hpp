#pragma once

// Virtual filesystem core: server trees and exports, per-client mount tables,
// path resolution across mount points, and write enforcement for nfs, mfs and
// union-mfs mounts.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace netroot::fs {

enum class FsErrc {
    not_found,
    not_a_directory,
    is_a_directory,
    exists,
    not_empty,
    read_only,      // EROFS
    no_space,       // ENOSPC
    mount_point_missing,
    already_mounted,
    export_unknown,
    busy,
    loop_detected,
    invalid_path,
};

std::string_view to_string(FsErrc code);

class FsError : public std::runtime_error {
public:
    FsError(FsErrc code, std::string path);

    FsErrc code() const noexcept { return code_; }
    const std::string& path() const noexcept { return path_; }

private:
    FsErrc code_;
    std::string path_;
};

enum class NodeKind { dir, file, socket, device, symlink };

std::string_view to_string(NodeKind kind);

using Uid = std::uint32_t;
inline constexpr std::uint16_t mode_mask = 07777;

// One node of a file tree. Directories own their children; every other kind
// has an empty child map. `content` holds file bytes or a symlink target.
class FsNode {
public:
    FsNode() = default;
    FsNode(NodeKind kind, std::string name, std::uint16_t mode = 0755, Uid owner = 0);
    FsNode(const FsNode& other);
    FsNode& operator=(const FsNode& other);
    FsNode(FsNode&&) noexcept = default;
    FsNode& operator=(FsNode&&) noexcept = default;

    NodeKind kind() const noexcept { return kind_; }
    bool is_dir() const noexcept { return kind_ == NodeKind::dir; }
    const std::string& name() const noexcept { return name_; }

    std::uint16_t mode() const noexcept { return mode_; }
    void set_mode(std::uint16_t mode) noexcept { mode_ = mode & mode_mask; }
    Uid owner() const noexcept { return owner_; }
    void set_owner(Uid owner) noexcept { owner_ = owner; }

    const std::string& content() const noexcept { return content_; }
    void set_content(std::string content) { content_ = std::move(content); }

    FsNode* child(std::string_view name);
    const FsNode* child(std::string_view name) const;
    // Inserts or replaces; returns the stored node.
    FsNode& put_child(FsNode node);
    bool erase_child(std::string_view name);
    std::vector<std::string> child_names() const;
    std::size_t child_count() const noexcept { return children_.size(); }

    // Walks a relative path ("" is this node). Returns nullptr when a
    // component is absent; throws not_a_directory on a non-dir intermediate.
    FsNode* walk(std::string_view rel);
    const FsNode* walk(std::string_view rel) const;

    // Number of nodes in this subtree, excluding this one.
    std::size_t descendant_count() const;
    std::size_t content_bytes() const;

private:
    NodeKind kind_ = NodeKind::dir;
    std::string name_;
    std::uint16_t mode_ = 0755;
    Uid owner_ = 0;
    std::string content_;
    std::map<std::string, std::unique_ptr<FsNode>, std::less<>> children_;
};

// Canonical 64-bit FNV-1a content hash over a subtree (names, kinds, modes,
// owners and bytes, children in sorted order).
std::uint64_t content_hash(const FsNode& node);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// Path helpers. Paths handled by the mount table are absolute and normalized:
// no empty, "." or ".." components and no trailing slash (except "/").
std::vector<std::string> split_path(std::string_view path);
std::string join_path(const std::vector<std::string>& parts, std::size_t count);
std::string normalize_path(std::string_view path);
bool is_normalized_absolute(std::string_view path);
std::string parent_path(std::string_view path);
std::string base_name(std::string_view path);

struct Export {
    std::string server_path;
    bool read_only = true;
    bool root_access = false;
};

// A file server: one tree holding every exported directory, the export table
// and a boot area of kernel images.
class NfsServer {
public:
    explicit NfsServer(std::string name = "server");

    const std::string& name() const noexcept { return name_; }
    FsNode& tree() noexcept { return tree_; }
    const FsNode& tree() const noexcept { return tree_; }

    // server_path must already be a directory in the tree.
    void add_export(const std::string& server_path, bool read_only, bool root_access);
    Export* find_export(std::string_view server_path);
    const Export* find_export(std::string_view server_path) const;
    const std::map<std::string, Export, std::less<>>& exports() const noexcept { return exports_; }

    // Creates intermediate directories (mode 0755, owner 0) as needed.
    FsNode& make_dirs(std::string_view path);
    FsNode& put(std::string_view path, FsNode node);

    std::uint64_t export_hash(std::string_view server_path) const;

private:
    std::string name_;
    FsNode tree_{NodeKind::dir, ""};
    std::map<std::string, Export, std::less<>> exports_;
};

enum class MountKind { nfs, mfs, union_mfs };

std::string_view to_string(MountKind kind);

// Capacity-limited memory filesystem store. For union mounts it is the upper
// layer and additionally tracks whiteouts (relative paths hidden in the lower
// layer).
class MfsStore {
public:
    MfsStore(std::uint64_t capacity_bytes, std::uint64_t max_inodes, bool union_layer = false);

    std::uint64_t capacity_bytes() const noexcept { return capacity_bytes_; }
    std::uint64_t max_inodes() const noexcept { return max_inodes_; }
    std::uint64_t used_bytes() const noexcept { return used_bytes_; }
    std::uint64_t used_inodes() const noexcept { return used_inodes_; }
    bool union_layer() const noexcept { return union_layer_; }

    FsNode& root() noexcept { return root_; }
    const FsNode& root() const noexcept { return root_; }

    const std::set<std::string>& whiteouts() const noexcept { return whiteouts_; }
    bool whited_out(const std::string& rel) const { return whiteouts_.count(rel) != 0; }
    void add_whiteout(const std::string& rel);
    void clear_whiteout(const std::string& rel) { whiteouts_.erase(rel); }

    // Accounted mutations. `parent` must be a directory inside this store.
    FsNode& create(FsNode& parent, FsNode node, const std::string& path);
    void remove(FsNode& parent, std::string_view name);
    void replace_content(FsNode& file, std::string content, const std::string& path);

private:
    std::uint64_t capacity_bytes_;
    std::uint64_t max_inodes_;
    std::uint64_t used_bytes_ = 0;
    std::uint64_t used_inodes_ = 0;
    bool union_layer_;
    FsNode root_{NodeKind::dir, ""};
    std::set<std::string> whiteouts_;
};

// Sizing options in the BSD newfs convention: s = 512-byte sectors,
// i = bytes per inode (default 8192).
struct MfsSize {
    std::uint64_t sectors = 0;
    std::uint64_t bytes_per_inode = 8192;

    std::uint64_t capacity_bytes() const noexcept { return sectors * 512; }
    std::uint64_t max_inodes() const noexcept
    {
        return bytes_per_inode == 0 ? 0 : capacity_bytes() / bytes_per_inode;
    }
};

// Reads "s=<n>"/"-s=<n>" and "i=<n>"/"-i=<n>" from a mount option list.
MfsSize mfs_size_from_options(const std::vector<std::string>& options);

struct MountEntry {
    MountKind kind = MountKind::nfs;
    // "server:/export/path" for nfs; the fstab spec (e.g. "swap") for mfs.
    std::string source;
    std::string mount_point;
    std::vector<std::string> options;
    // Assigned to mfs and union-mfs mounts only.
    std::optional<std::uint64_t> mfs_id;

    bool has_option(std::string_view opt) const;
};

struct NodeInfo {
    NodeKind kind;
    std::uint16_t mode;
    Uid owner;
    std::size_t size;
};

struct RoViolation {
    std::string operation;
    std::string path;
    std::string mount_point;
};

// A client's namespace. Entries are kept in mount order; a path belongs to
// the entry with the longest mount-point prefix, the latest one winning when
// union mounts stack on the same point.
class MountTable {
public:
    MountTable() = default;
    MountTable(MountTable&&) noexcept = default;
    MountTable& operator=(MountTable&&) noexcept = default;
    MountTable(const MountTable&) = delete;
    MountTable& operator=(const MountTable&) = delete;

    // nfs entries must name "<server>:<exported path>" of `server`.
    void mount(MountEntry entry, NfsServer* server = nullptr);
    // Removes the most recent entry on mount_point. Throws busy when another
    // mount lives below it.
    void unmount(std::string_view mount_point);
    // Removes every entry; recorded violations are kept.
    void clear();
    // "mount -u": replaces the options of the most recent entry on mount_point.
    void remount(std::string_view mount_point, std::vector<std::string> options);

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const MountEntry& entry(std::size_t index) const { return entries_.at(index).entry; }
    std::vector<MountEntry> entries() const;
    bool is_mounted(std::string_view mount_point) const;
    const MfsStore* store(std::size_t index) const { return entries_.at(index).store.get(); }

    // Entry index owning `path` (after symlink resolution).
    std::size_t owner_of(std::string_view path) const;

    bool exists(std::string_view path) const;
    NodeInfo stat(std::string_view path) const;
    NodeInfo lstat(std::string_view path) const;
    std::string read_file(std::string_view path) const;
    std::string read_link(std::string_view path) const;
    std::vector<std::string> list(std::string_view path) const;
    // True when a write under `path` would not be refused as read-only.
    bool writable(std::string_view path) const;

    void write_file(std::string_view path, std::string bytes, Uid uid = 0);
    void mkdir(std::string_view path, std::uint16_t mode = 0755, Uid uid = 0);
    void mknod(std::string_view path, std::uint16_t mode = 0600, Uid uid = 0);
    void mksock(std::string_view path, std::uint16_t mode = 0666, Uid uid = 0);
    void symlink(std::string_view path, std::string target, Uid uid = 0);
    void chmod(std::string_view path, std::uint16_t mode);
    void chown(std::string_view path, Uid uid);
    void unlink(std::string_view path);

    // Attempts refused with EROFS, in order.
    const std::vector<RoViolation>& ro_violations() const noexcept { return violations_; }

    // Resolves symlinks in every component (and the last one when
    // follow_last); at most 32 links are followed.
    std::string canonical(std::string_view path, bool follow_last = true) const;

private:
    struct Slot {
        MountEntry entry;
        NfsServer* server = nullptr;
        std::string export_path;
        std::unique_ptr<MfsStore> store;
    };

    // The node visible at `path` as resolved through entries[0, limit).
    struct Found {
        FsNode* node = nullptr;
        std::size_t slot = 0;
        bool upper = false;   // node lives in the slot's own store
    };

    std::size_t owner_below(std::string_view path, std::size_t limit) const;
    static std::string rel_of(const std::string& mount_point, std::string_view path);
    std::optional<Found> lookup(std::string_view path, std::size_t limit) const;
    std::optional<Found> lookup_in(std::size_t slot, const std::string& rel) const;
    Found require(std::string_view path) const;
    bool slot_writable(std::size_t slot) const;
    void check_writable(std::size_t slot, std::string_view op, std::string_view path);

    // Returns the directory node in the owning writable layer that will hold
    // `path`'s last component, copying lower directories up for unions.
    FsNode& writable_parent(std::size_t slot, const std::string& path, const std::string& rel);
    FsNode& copy_up(std::size_t slot, const std::string& path, const std::string& rel);
    void create_node(std::string_view path, FsNode node);

    std::vector<Slot> entries_;
    std::vector<RoViolation> violations_;
};

// "<source> on <mount_point> type <kind> (<flags>)", one line per entry in
// mount order. Empty flag sets drop the parenthesis.
std::string render_mount_line(const MountEntry& entry);
std::string render_mount_table(const MountTable& table);
// Replaces "mfs:<digits>" with "mfs:*".
std::string normalize_mfs_ids(std::string_view text);

}  // namespace netroot::fs
